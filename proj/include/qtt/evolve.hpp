#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qtt/observables.hpp"
#include "qtt/operators.hpp"
#include "qtt/solver.hpp"

namespace qtt {

struct EvolutionConfig {
  double delta_tau = 0.0;
  long long n_steps = 0;
  bool renormalize_each_step = true;
  long long observe_every = 1;
  int n_ref_bits = 25;  // residual normalization reference (Table-1 alpha=10 layout)

  void validate() const {
    if (delta_tau <= 0.0) throw std::invalid_argument("EvolutionConfig: delta_tau must be > 0");
    if (n_steps < 0) throw std::invalid_argument("EvolutionConfig: n_steps must be >= 0");
    if (observe_every < 1) throw std::invalid_argument("EvolutionConfig: observe_every must be >= 1");
  }
};

struct EvolutionResult {
  std::vector<TrajectoryRecord> records;
  Mps final_state;
  bool completed = false;
  std::string error;
};

// Called on every recorded step, after the record has been assembled.
using StepObserver = std::function<void(const TrajectoryRecord&, const Mps&, const StepReport&)>;
// Called on every step (for checkpointing); return ignored.
using StepHook = std::function<void(long long step, const Mps&)>;

inline TrajectoryRecord make_record(long long step, double tau, const Mps& psi,
                                    const SystemOperators& ops, const StepReport& rep,
                                    int n_ref_bits) {
  TrajectoryRecord r;
  r.step = step;
  r.tau = tau;
  r.n_pump = detail::real_expectation(psi, ops.number_pump, "photon_number");
  r.n_signal = detail::real_expectation(psi, ops.number_signal, "photon_number");
  r.energy = r.n_signal + 2.0 * r.n_pump;
  const double xm = detail::real_expectation(psi, ops.x_signal, "quadrature mean");
  const double x2 = detail::real_expectation(psi, ops.x_signal_sq, "quadrature second moment");
  r.var_x_signal = x2 - xm * xm;
  const CompressionMetrics c = compression_metrics(psi);
  r.max_bond = c.max_bond;
  r.param_count = c.param_count;
  r.inverse_compression = c.inverse_compression;
  r.residual_raw = rep.residual_raw;
  r.residual_normalized =
      rep.residual_raw / std::exp2(0.5 * (psi.n_sites() - n_ref_bits));
  r.norm_drift = rep.norm_before_renorm - 1.0;
  return r;
}

// Implicit-Euler time stepping: solve U psi_{t+1} = psi_t each step, with the
// previous state as warm start. Records are taken at step 0, every
// observe_every steps, and at the final step.
inline EvolutionResult evolve(const Mps& initial, const SystemOperators& ops,
                              const EvolutionConfig& ecfg, const SolverConfig& scfg,
                              const StepObserver& observer = {}, long long start_step = 0,
                              const StepHook& step_hook = {}) {
  ecfg.validate();
  scfg.validate();
  EvolutionResult result;
  Mps psi = initial;

  auto record = [&](long long step, const StepReport& rep) {
    TrajectoryRecord r = make_record(step, step * ecfg.delta_tau, psi, ops, rep, ecfg.n_ref_bits);
    result.records.push_back(r);
    if (observer) observer(r, psi, rep);
  };

  if (start_step == 0) record(0, StepReport{});
  for (long long step = start_step + 1; step <= ecfg.n_steps; ++step) {
    StepReport rep;
    try {
      auto [next, r] = solve_linear(ops.propagator, psi, psi, scfg);
      rep = r;
      psi = std::move(next);
    } catch (const solver_breakdown_error& e) {
      result.error = e.what();
      result.final_state = std::move(psi);
      return result;  // partial trajectory retained
    }
    rep.norm_before_renorm = norm(psi);
    if (ecfg.renormalize_each_step) scale_in_place(psi, 1.0 / rep.norm_before_renorm);
    if (step_hook) step_hook(step, psi);
    if (step % ecfg.observe_every == 0 || step == ecfg.n_steps) record(step, rep);
  }
  result.final_state = std::move(psi);
  result.completed = true;
  return result;
}

}  // namespace qtt
