#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qtt/evolve.hpp"
#include "qtt/observables.hpp"

using namespace qtt;

namespace {
const TruncationPolicy kEncode{1 << 20, 1e-12};
const ModeLayout kTable1{{-24.0, 24.0, 12}, {-10.0, 10.0, 13}};
}  // namespace

TEST_CASE("photon numbers of the initial product state") {
  Mps psi = initial_system_state(kTable1, 10.0, kEncode);
  CHECK(photon_number(psi, kTable1, Mode::pump) == Catch::Approx(100.0).margin(0.01));
  CHECK(photon_number(psi, kTable1, Mode::signal) <= 1e-4);
  CHECK(total_energy(psi, kTable1) == Catch::Approx(200.0).margin(0.02));

  ModeLayout t100{{-151.0, 151.0, 15}, {-10.0, 10.0, 15}};
  Mps psi100 = initial_system_state(t100, 100.0, kEncode);
  CHECK(photon_number(psi100, t100, Mode::pump) == Catch::Approx(10000.0).margin(1.0));
}

TEST_CASE("photon numbers factor over product states") {
  ModeLayout layout{{-12.0, 12.0, 9}, {-8.0, 8.0, 9}};
  Mps pump = coherent_state_mps(layout.pump, 1.5, kEncode);
  Mps signal = hermite_mode_mps(layout.signal, 3, kEncode);
  Mps prod = stack(pump, signal);

  const double np_sys = photon_number(prod, layout, Mode::pump);
  const double np_local = std::real(expectation(pump, ladder_mpos(layout.pump).number));
  CHECK(np_sys == Catch::Approx(np_local).margin(1e-10));

  const double ns_sys = photon_number(prod, layout, Mode::signal);
  const double ns_local = std::real(expectation(signal, ladder_mpos(layout.signal).number));
  CHECK(ns_sys == Catch::Approx(ns_local).margin(1e-10));
}

TEST_CASE("quadrature statistics of gaussian states") {
  ModeLayout layout = kTable1;
  Mps psi = initial_system_state(layout, 10.0, kEncode);
  QuadratureStats vac = quadrature_stats(psi, layout, Mode::signal);
  CHECK(vac.mean == Catch::Approx(0.0).margin(1e-8));
  CHECK(vac.variance == Catch::Approx(0.5).margin(1e-6));

  QuadratureStats pump = quadrature_stats(psi, layout, Mode::pump);
  CHECK(pump.mean == Catch::Approx(10.0 * std::sqrt(2.0)).margin(1e-4));
  CHECK(pump.variance == Catch::Approx(0.5).margin(1e-4));
}

TEST_CASE("reduced density of the vacuum signal") {
  ModeLayout layout{{-12.0, 12.0, 9}, {-10.0, 10.0, 10}};
  Mps psi = initial_system_state(layout, 2.0, kEncode);
  FockDensityMatrix rho = reduced_density_fock(psi, layout, Mode::signal, 5);
  rho.check_invariants(1e-8);
  CHECK(std::abs(rho.rho(0, 0) - cxd(1, 0)) <= 1e-6);
  for (int m = 1; m < 5; ++m) CHECK(std::abs(rho.rho(m, m)) <= 1e-6);
  CHECK(rho.captured_weight == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("reduced density of a coherent pump is poissonian") {
  ModeLayout layout{{-12.0, 12.0, 10}, {-10.0, 10.0, 10}};
  Mps psi = initial_system_state(layout, 2.0, kEncode);
  FockDensityMatrix rho = reduced_density_fock(psi, layout, Mode::pump, 30);
  rho.check_invariants(1e-8);
  double log_w = -4.0;  // log of e^{-alpha^2} alpha^{2m} / m! at m = 0
  for (int m = 0; m < 25; ++m) {
    CHECK(std::abs(rho.rho(m, m).real() - std::exp(log_w)) <= 1e-4);
    log_w += std::log(4.0) - std::log(m + 1.0);
  }
}

TEST_CASE("reduced density of a product state is the single-mode projection") {
  ModeLayout layout{{-12.0, 12.0, 9}, {-10.0, 10.0, 10}};
  Mps signal = hermite_mode_mps(layout.signal, 2, kEncode);
  Mps prod = stack(coherent_state_mps(layout.pump, 1.0, kEncode), signal);
  FockDensityMatrix rho = reduced_density_fock(prod, layout, Mode::signal, 6);
  for (int m = 0; m < 6; ++m)
    for (int k = 0; k < 6; ++k) {
      const double want = (m == 2 && k == 2) ? 1.0 : 0.0;
      CHECK(std::abs(rho.rho(m, k) - cxd(want, 0)) <= 1e-8);
    }
}

TEST_CASE("uhlmann fidelity on known pairs") {
  // pure |0> and pure coherent alpha = 1, cutoff 20
  const int m = 20;
  Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(m);
  zero(0) = 1.0;
  Eigen::VectorXcd coh(m);
  double log_amp = -0.5;
  for (int k = 0; k < m; ++k) {
    coh(k) = std::exp(log_amp);
    log_amp += std::log(1.0) - 0.5 * std::log(k + 1.0);
  }
  coh.normalize();
  FockDensityMatrix rho{m, zero * zero.adjoint(), 1.0};
  FockDensityMatrix sigma{m, coh * coh.adjoint(), 1.0};

  CHECK(fidelity(rho, rho) == Catch::Approx(1.0).margin(1e-10));
  CHECK(fidelity(rho, sigma) == Catch::Approx(std::exp(-1.0)).margin(1e-6));
  CHECK(std::abs(fidelity(rho, sigma) - fidelity(sigma, rho)) <= 1e-10);

  Eigen::VectorXcd one = Eigen::VectorXcd::Zero(m);
  one(1) = 1.0;
  FockDensityMatrix tau{m, one * one.adjoint(), 1.0};
  CHECK(fidelity(rho, tau) <= 1e-12);

  FockDensityMatrix wrong{m + 1, Eigen::MatrixXcd::Identity(m + 1, m + 1), 1.0};
  CHECK_THROWS_AS(fidelity(rho, wrong), std::invalid_argument);
}

TEST_CASE("compression metrics") {
  std::vector<Eigen::Vector2cd> kets(25, Eigen::Vector2cd(1, 0));
  Mps prod = qtt_test::product_state(kets);
  CompressionMetrics m = compression_metrics(prod);
  CHECK(m.param_count == 50);
  CHECK(m.max_bond == 1);
  CHECK(m.inverse_compression == Catch::Approx(50.0 / std::exp2(25)).margin(1e-18));
}

TEST_CASE("evolution records zero steps as a single row") {
  ModeLayout layout{{-12.0, 12.0, 6}, {-8.0, 8.0, 6}};
  SystemOperators ops = build_system_operators(layout, 1e-3);
  Mps psi = initial_system_state(layout, 2.0, kEncode);
  EvolutionConfig ecfg;
  ecfg.delta_tau = 1e-3;
  ecfg.n_steps = 0;
  EvolutionResult res = evolve(psi, ops, ecfg, SolverConfig{});
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].step == 0);
  CHECK(res.records[0].n_pump == Catch::Approx(4.0).margin(0.05));
  CHECK(res.completed);
}

TEST_CASE("short evolution conserves energy and squeezes the signal") {
  ModeLayout layout{{-12.0, 12.0, 7}, {-8.0, 8.0, 7}};
  SystemOperators ops = build_system_operators(layout, 1e-3);
  Mps psi = initial_system_state(layout, 2.0, kEncode);
  EvolutionConfig ecfg;
  ecfg.delta_tau = 1e-3;
  ecfg.n_steps = 40;
  ecfg.observe_every = 10;
  SolverConfig scfg;
  scfg.truncation = TruncationPolicy{24, 1e-10};
  EvolutionResult res = evolve(psi, ops, ecfg, scfg);
  REQUIRE(res.completed);
  REQUIRE(res.records.size() == 5);
  const double e0 = res.records.front().energy;
  for (const auto& r : res.records) {
    CHECK(std::abs(r.energy - e0) / e0 <= 1e-3);
    CHECK(r.var_x_signal > 0.0);
  }
  // Var X drops toward exp(-4 alpha tau)/2 (alpha = 2)
  const auto& last = res.records.back();
  CHECK(last.var_x_signal < 0.5);
  CHECK(last.var_x_signal == Catch::Approx(0.5 * std::exp(-8.0 * last.tau)).epsilon(0.05));
}
