#pragma once

#include <iostream>
#include <string>

#include "qtt/config.hpp"
#include "qtt/evolve.hpp"
#include "qtt/oracles.hpp"

namespace qtt {

// Cross-validation of the MPS path against both brute-force oracles on a
// desk-scale configuration: per-step state overlap and photon numbers against
// the dense-grid evolution, reduced-density fidelities against the Fock
// evolution at every recorded step.
struct ValidationReport {
  double min_overlap = 1.0;
  double max_photon_dev = 0.0;
  double min_fidelity_pump = 1.0;
  double min_fidelity_signal = 1.0;
  bool grid_pass = false;
  bool fock_pass = false;

  bool pass() const { return grid_pass && fock_pass; }
};

struct ValidationThresholds {
  double overlap_min = 0.999;
  double photon_dev_max = 1e-3;
  double fidelity_min = 0.99;
};

inline ValidationReport run_desk_validation(const SimConfig& cfg,
                                            const ValidationThresholds& thr = {},
                                            std::ostream* log = &std::cout) {
  cfg.validate();
  if (cfg.layout().total_sites() > 20)
    throw std::invalid_argument("validation needs a desk-scale layout (<= 20 sites)");
  if (cfg.fock_cutoff_pump < 2 || cfg.fock_cutoff_signal < 3)
    throw std::invalid_argument("validation needs positive fock cutoffs");

  const ModeLayout layout = cfg.layout();
  SystemOperators ops = build_system_operators(layout, cfg.delta_tau);
  SolverConfig scfg;
  scfg.max_sweeps = cfg.max_sweeps;
  scfg.rel_residual_tol = cfg.residual_tol;
  scfg.truncation = TruncationPolicy{cfg.chi_max, cfg.sv_cutoff};

  Mps psi = initial_system_state(layout, cfg.alpha, TruncationPolicy{cfg.chi_max, cfg.sv_cutoff});
  DenseGridEvolver grid_oracle(layout, cfg.alpha, cfg.delta_tau, cfg.renormalize);
  FockEvolver fock_oracle(cfg.alpha, cfg.fock_cutoff_pump, cfg.fock_cutoff_signal, cfg.delta_tau,
                          cfg.renormalize);

  ValidationReport rep;
  auto check_fock = [&]() {
    FockDensityMatrix mps_p =
        reduced_density_fock(psi, layout, Mode::pump, cfg.fock_cutoff_pump);
    FockDensityMatrix mps_s =
        reduced_density_fock(psi, layout, Mode::signal, cfg.fock_cutoff_signal);
    const double fp = fidelity(mps_p, fock_oracle.reduced_pump(cfg.fock_cutoff_pump));
    const double fs = fidelity(mps_s, fock_oracle.reduced_signal(cfg.fock_cutoff_signal));
    rep.min_fidelity_pump = std::min(rep.min_fidelity_pump, fp);
    rep.min_fidelity_signal = std::min(rep.min_fidelity_signal, fs);
  };
  check_fock();

  for (long long step = 1; step <= cfg.n_steps; ++step) {
    auto [next, srep] = solve_linear(ops.propagator, psi, psi, scfg);
    psi = std::move(next);
    const double nrm = norm(psi);
    if (cfg.renormalize) scale_in_place(psi, 1.0 / nrm);
    grid_oracle.step();
    fock_oracle.step();

    const Eigen::VectorXcd dense_mps = mps_to_dense(psi);
    const double overlap = std::abs(grid_oracle.state().dot(dense_mps));
    rep.min_overlap = std::min(rep.min_overlap, overlap);

    if (step % cfg.observe_every == 0 || step == cfg.n_steps) {
      const TrajectoryRecord g = grid_oracle.observe(cfg.n_ref_bits);
      const double np_mps = detail::real_expectation(psi, ops.number_pump, "photon_number");
      const double ns_mps = detail::real_expectation(psi, ops.number_signal, "photon_number");
      rep.max_photon_dev = std::max({rep.max_photon_dev, std::abs(np_mps - g.n_pump),
                                     std::abs(ns_mps - g.n_signal)});
      check_fock();
    }
  }

  rep.grid_pass = rep.min_overlap >= thr.overlap_min && rep.max_photon_dev <= thr.photon_dev_max;
  rep.fock_pass = rep.min_fidelity_pump >= thr.fidelity_min &&
                  rep.min_fidelity_signal >= thr.fidelity_min;
  if (log) {
    *log << "validate grid : min overlap " << rep.min_overlap << " (need >= " << thr.overlap_min
         << "), max photon dev " << rep.max_photon_dev << " (need <= " << thr.photon_dev_max
         << ") -> " << (rep.grid_pass ? "PASS" : "FAIL") << "\n";
    *log << "validate fock : min fidelity pump " << rep.min_fidelity_pump << " signal "
         << rep.min_fidelity_signal << " (need >= " << thr.fidelity_min << ") -> "
         << (rep.fock_pass ? "PASS" : "FAIL") << "\n";
  }
  return rep;
}

}  // namespace qtt
