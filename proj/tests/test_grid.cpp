#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "qtt/grid.hpp"
#include "qtt/operators.hpp"

using namespace qtt;

namespace {
const TruncationPolicy kEncode{1 << 20, 1e-12};

bool bitwise_equal(const Mps& a, const Mps& b) {
  if (a.n_sites() != b.n_sites()) return false;
  for (int j = 0; j < a.n_sites(); ++j)
    for (int i = 0; i < 2; ++i)
      if (a.sites[j].a[i] != b.sites[j].a[i]) return false;
  return true;
}
}  // namespace

TEST_CASE("grid points reproduce the endpoint formula") {
  QuadratureGrid g{-10.0, 10.0, 13};
  g.validate();
  CHECK(g.point(0) == -10.0);
  CHECK(g.point(g.n_points() - 1) == Catch::Approx(10.0).margin(1e-12));
  CHECK(g.dx() == Catch::Approx(20.0 / 8191.0));

  // dyadic spacing: every point is exact
  QuadratureGrid d{0.0, 15.0, 4};
  for (Eigen::Index k = 0; k < 16; ++k) CHECK(d.point(k) == double(k));

  CHECK_THROWS_AS((QuadratureGrid{1.0, 1.0, 4}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((QuadratureGrid{0.0, 1.0, 0}.validate()), std::invalid_argument);
}

TEST_CASE("sample_function folds in the quadrature weight") {
  QuadratureGrid g{0.0, 1.0, 1};
  Eigen::VectorXcd v = sample_function(g, [](double) { return cxd(1.0, 0.0); });
  CHECK(v(0) == cxd(1.0, 0.0));
  CHECK(v(1) == cxd(1.0, 0.0));

  // unit-norm Gaussian integrates to one on a wide fine grid
  QuadratureGrid gs{-10.0, 10.0, 13};
  const double c = std::pow(M_PI, -0.25);
  Eigen::VectorXcd vac =
      sample_function(gs, [c](double x) { return cxd(c * std::exp(-0.5 * x * x), 0.0); });
  CHECK(vac.norm() == Catch::Approx(1.0).margin(1e-10));
  CHECK(std::abs(vac(0)) <= 1e-12);
  CHECK(std::abs(vac(vac.size() - 1)) <= 1e-12);
}

TEST_CASE("vacuum state moments") {
  QuadratureGrid g{-10.0, 10.0, 13};
  EncodeReport rep;
  Mps vac = vacuum_state_mps(g, kEncode, &rep);
  CHECK(rep.support_ok);
  CHECK(norm(vac) == Catch::Approx(1.0).margin(1e-10));
  CHECK(vac.max_bond() <= 10);  // measured TT rank of the sampled gaussian at 1e-12

  ModeOperators ops = ladder_mpos(g);
  CHECK(std::abs(expectation(vac, ops.X)) <= 1e-10);
  const double x2 =
      std::real(expectation(vac, mpo_truncate(mpo_mul(ops.X, ops.X), mpo_rounding())));
  CHECK(x2 == Catch::Approx(0.5).margin(1e-6));
  CHECK(std::abs(expectation(vac, ops.number)) <= 1e-6);
}

TEST_CASE("coherent state centers at alpha sqrt2") {
  QuadratureGrid gp{-24.0, 24.0, 12};
  Mps coh = coherent_state_mps(gp, 10.0, kEncode);
  ModeOperators ops = ladder_mpos(gp);
  const double x0 = 10.0 * std::sqrt(2.0);
  CHECK(std::real(expectation(coh, ops.X)) == Catch::Approx(x0).margin(1e-8));

  QuadratureGrid gp100{-151.0, 151.0, 15};
  Mps coh100 = coherent_state_mps(gp100, 100.0, kEncode);
  ModeOperators ops100 = ladder_mpos(gp100);
  CHECK(std::real(expectation(coh100, ops100.X)) ==
        Catch::Approx(100.0 * std::sqrt(2.0)).margin(1e-6));

  CHECK(bitwise_equal(coherent_state_mps(gp, 0.0, kEncode), vacuum_state_mps(gp, kEncode)));
  CHECK_THROWS_AS(coherent_state_mps(gp, 15.0, kEncode), std::invalid_argument);
}

TEST_CASE("hermite modes are orthonormal eigenstates") {
  QuadratureGrid g{-10.0, 10.0, 13};
  CHECK(bitwise_equal(hermite_mode_mps(g, 0, kEncode), vacuum_state_mps(g, kEncode)));

  std::vector<Mps> modes;
  for (int m = 0; m <= 20; ++m) modes.push_back(hermite_mode_mps(g, m, kEncode));
  double worst = 0.0;
  for (int m = 0; m <= 20; ++m)
    for (int k = 0; k <= m; ++k) {
      const double target = (m == k) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(std::abs(inner(modes[m], modes[k])) - target));
    }
  CHECK(worst <= 1e-8);

  ModeOperators ops = ladder_mpos(g);
  for (int m : {1, 4})
    CHECK(std::real(expectation(modes[m], ops.number)) == Catch::Approx(m).margin(1e-4));
  // grid error grows with m: measured 1.5e-4 at m = 10 on this grid
  CHECK(std::real(expectation(modes[10], ops.number)) == Catch::Approx(10.0).margin(5e-4));

  QuadratureGrid coarse{-10.0, 10.0, 5};
  CHECK_THROWS_AS(hermite_mode_mps(coarse, 400, kEncode), std::invalid_argument);
}

TEST_CASE("initial system state stacks pump then signal") {
  ModeLayout t1{{-24.0, 24.0, 12}, {-10.0, 10.0, 13}};
  Mps psi = initial_system_state(t1, 10.0, kEncode);
  CHECK(psi.n_sites() == 25);
  CHECK(norm(psi) == Catch::Approx(1.0).margin(1e-10));

  ModeLayout t2{{-151.0, 151.0, 15}, {-10.0, 10.0, 15}};
  CHECK(initial_system_state(t2, 100.0, kEncode).n_sites() == 30);

  ModeLayout small{{-12.0, 12.0, 10}, {-8.0, 8.0, 10}};
  Mps zero_alpha = initial_system_state(small, 0.0, kEncode);
  SystemOperators sys = build_system_operators(small, 1e-3);
  const double e = std::real(expectation(zero_alpha, sys.number_signal)) +
                   2.0 * std::real(expectation(zero_alpha, sys.number_pump));
  CHECK(std::abs(e) <= 1e-6);
}

TEST_CASE("encoders are deterministic") {
  QuadratureGrid g{-10.0, 10.0, 10};
  CHECK(bitwise_equal(vacuum_state_mps(g, kEncode), vacuum_state_mps(g, kEncode)));
  CHECK(bitwise_equal(hermite_mode_mps(g, 7, kEncode), hermite_mode_mps(g, 7, kEncode)));
}
