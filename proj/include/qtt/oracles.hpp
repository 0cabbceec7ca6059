#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <string>
#include <vector>

#include "qtt/evolve.hpp"
#include "qtt/grid.hpp"
#include "qtt/observables.hpp"

namespace qtt {

using SparseC = Eigen::SparseMatrix<cxd>;

namespace oracle_detail {

inline SparseC sparse_position(const QuadratureGrid& g) {
  const Eigen::Index n = g.n_points();
  SparseC x(n, n);
  x.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index k = 0; k < n; ++k) x.insert(k, k) = g.point(k);
  x.makeCompressed();
  return x;
}

inline SparseC sparse_derivative(const QuadratureGrid& g) {
  const Eigen::Index n = g.n_points();
  const double f = 1.0 / (2.0 * g.dx());
  SparseC d(n, n);
  d.reserve(Eigen::VectorXi::Constant(n, 2));
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    d.insert(k, k + 1) = f;
    d.insert(k + 1, k) = -f;
  }
  d.makeCompressed();
  return d;
}

inline SparseC sparse_kron(const SparseC& a, const SparseC& b) {
  SparseC out(a.rows() * b.rows(), a.cols() * b.cols());
  std::vector<Eigen::Triplet<cxd>> trip;
  trip.reserve(static_cast<size_t>(a.nonZeros()) * b.nonZeros());
  for (int ka = 0; ka < a.outerSize(); ++ka)
    for (SparseC::InnerIterator ia(a, ka); ia; ++ia)
      for (int kb = 0; kb < b.outerSize(); ++kb)
        for (SparseC::InnerIterator ib(b, kb); ib; ++ib)
          trip.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                            ia.value() * ib.value());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace oracle_detail

// Single-mode sparse quadrature operators, same construction as the MPOs.
struct SparseModeOps {
  SparseC X, D, a, a_dag, number;

  explicit SparseModeOps(const QuadratureGrid& g) {
    X = oracle_detail::sparse_position(g);
    D = oracle_detail::sparse_derivative(g);
    const double s = 1.0 / std::sqrt(2.0);
    a = s * (X + D);
    a_dag = s * (X - D);
    number = (a_dag * a).pruned();
  }
};

// Brute-force evolution of the same discretized problem with sparse matrices
// and an iterative per-step solve; the co-stepping baseline for the MPS path.
class DenseGridEvolver {
 public:
  DenseGridEvolver(const ModeLayout& layout, double alpha, double delta_tau,
                   bool renormalize = true)
      : layout_(layout), delta_tau_(delta_tau), renormalize_(renormalize) {
    if (layout.total_sites() > 20)
      throw resource_limit_error("DenseGridEvolver: layout above the sparse feasibility guard");
    SparseModeOps pump(layout.pump);
    SparseModeOps signal(layout.signal);
    const Eigen::Index np = layout.pump.n_points(), ns = layout.signal.n_points();
    SparseC ip(np, np), is(ns, ns);
    ip.setIdentity();
    is.setIdentity();
    // H = i (a_p as^dag as^dag - a_p^dag as as), dimensionless
    SparseC asd2 = (signal.a_dag * signal.a_dag).pruned();
    SparseC t = oracle_detail::sparse_kron(pump.a, asd2);
    SparseC h = (cxd(0, 1) * (t - SparseC(t.adjoint()))).pruned();
    hamiltonian_ = h;
    SparseC eye(np * ns, np * ns);
    eye.setIdentity();
    u_ = (eye - cxd(0, delta_tau) * h).pruned();
    u_.makeCompressed();
    n_pump_ = oracle_detail::sparse_kron(pump.number, is);
    n_signal_ = oracle_detail::sparse_kron(ip, signal.number);
    x_signal_ = oracle_detail::sparse_kron(ip, signal.X);
    x2_signal_ = oracle_detail::sparse_kron(ip, SparseC((signal.X * signal.X).pruned()));

    solver_.preconditioner().setDroptol(1e-6);
    solver_.preconditioner().setFillfactor(12);
    solver_.setTolerance(1e-10);
    solver_.setMaxIterations(2000);
    solver_.compute(u_);
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("DenseGridEvolver: preconditioner setup failed");

    // initial state: coherent pump (x) vacuum signal, grid-normalized
    auto gauss = [](const QuadratureGrid& g, double center) {
      Eigen::VectorXcd v(g.n_points());
      const double c = std::pow(M_PI, -0.25);
      for (Eigen::Index k = 0; k < g.n_points(); ++k) {
        const double x = g.point(k);
        v(k) = c * std::exp(-0.5 * (x - center) * (x - center));
      }
      v.normalize();
      return v;
    };
    Eigen::VectorXcd vp = gauss(layout.pump, alpha * std::sqrt(2.0));
    Eigen::VectorXcd vs = gauss(layout.signal, 0.0);
    state_ = Eigen::VectorXcd(np * ns);
    for (Eigen::Index p = 0; p < np; ++p) state_.segment(p * ns, ns) = vp(p) * vs;
    state_.normalize();
  }

  // Advance one implicit-Euler step; returns the solve residual.
  double step() {
    Eigen::VectorXcd prev = state_;
    state_ = solver_.solveWithGuess(prev, prev);
    if (solver_.info() != Eigen::Success && solver_.error() > 1e-8)
      throw std::runtime_error("DenseGridEvolver: iterative solve failed (error " +
                               std::to_string(solver_.error()) + ")");
    last_residual_ = (u_ * state_ - prev).norm();
    norm_before_renorm_ = state_.norm();
    if (renormalize_) state_ /= norm_before_renorm_;
    ++step_count_;
    return last_residual_;
  }

  TrajectoryRecord observe(int n_ref_bits = 25) const {
    TrajectoryRecord r;
    r.step = step_count_;
    r.tau = step_count_ * delta_tau_;
    r.n_pump = ev(n_pump_);
    r.n_signal = ev(n_signal_);
    r.energy = r.n_signal + 2.0 * r.n_pump;
    const double xm = ev(x_signal_);
    r.var_x_signal = ev(x2_signal_) - xm * xm;
    r.max_bond = -1;
    r.param_count = -1;
    r.inverse_compression = -1.0;
    r.residual_raw = last_residual_;
    r.residual_normalized =
        last_residual_ / std::exp2(0.5 * (layout_.total_sites() - n_ref_bits));
    r.norm_drift = norm_before_renorm_ - 1.0;
    return r;
  }

  const Eigen::VectorXcd& state() const { return state_; }
  const SparseC& hamiltonian() const { return hamiltonian_; }
  const SparseC& propagator() const { return u_; }
  const ModeLayout& layout() const { return layout_; }

 private:
  double ev(const SparseC& op) const { return std::real(state_.dot(op * state_)); }

  ModeLayout layout_;
  double delta_tau_;
  bool renormalize_;
  SparseC hamiltonian_, u_, n_pump_, n_signal_, x_signal_, x2_signal_;
  Eigen::BiCGSTAB<SparseC, Eigen::IncompleteLUT<cxd>> solver_;
  Eigen::VectorXcd state_;
  double last_residual_ = 0.0;
  double norm_before_renorm_ = 1.0;
  long long step_count_ = 0;
};

inline std::vector<TrajectoryRecord> dense_grid_evolve(const ModeLayout& layout, double alpha,
                                                       const EvolutionConfig& ecfg) {
  ecfg.validate();
  DenseGridEvolver ev(layout, alpha, ecfg.delta_tau, ecfg.renormalize_each_step);
  std::vector<TrajectoryRecord> out;
  out.push_back(ev.observe(ecfg.n_ref_bits));
  for (long long s = 1; s <= ecfg.n_steps; ++s) {
    ev.step();
    if (s % ecfg.observe_every == 0 || s == ecfg.n_steps) out.push_back(ev.observe(ecfg.n_ref_bits));
  }
  return out;
}

// Fock-basis state-vector evolution of the same Hamiltonian. The generator
// conserves n_s + 2 n_p exactly, so the state decomposes into independent
// sectors in which the implicit-Euler matrix is tridiagonal; each sector is
// LU-factored once and reused every step.
class FockEvolver {
 public:
  FockEvolver(double alpha, int cutoff_pump, int cutoff_signal, double delta_tau,
              bool renormalize = true)
      : np_(cutoff_pump), ns_(cutoff_signal), delta_tau_(delta_tau), renormalize_(renormalize) {
    if (np_ < 2 || ns_ < 3) throw std::invalid_argument("FockEvolver: cutoffs too small");
    if (static_cast<long long>(np_) * ns_ > 200000)
      throw resource_limit_error("FockEvolver: cutoff product above the feasibility guard");
    state_ = Eigen::MatrixXcd::Zero(np_, ns_);
    // coherent amplitudes via log-space recurrence
    double log_amp = -0.5 * alpha * alpha;
    for (int n = 0; n < np_; ++n) {
      state_(n, 0) = std::exp(log_amp);
      if (alpha > 0.0) log_amp += std::log(alpha) - 0.5 * std::log(n + 1.0);
    }
    if (alpha == 0.0) {
      state_.setZero();
      state_(0, 0) = 1.0;
    }
    state_ /= state_.norm();

    // sectors of constant E = 2 n_p + n_s, ordered by descending n_p
    for (int e = 0; e <= 2 * (np_ - 1) + (ns_ - 1); ++e) {
      Sector sec;
      for (int p = std::min(e / 2, np_ - 1); p >= 0; --p) {
        const int s = e - 2 * p;
        if (s < ns_) {
          sec.p.push_back(p);
          sec.s.push_back(s);
        }
      }
      const int m = static_cast<int>(sec.p.size());
      if (m == 0) continue;
      Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(m, m);
      for (int idx = 0; idx + 1 < m; ++idx) {
        const int p = sec.p[idx], s = sec.s[idx];
        // H[(p-1, s+2), (p, s)] = i h, h = sqrt(p (s+1)(s+2))
        const double h = std::sqrt(double(p) * (s + 1.0) * (s + 2.0));
        u(idx + 1, idx) = cxd(0, -delta_tau) * cxd(0, h);    // -i dt (i h)
        u(idx, idx + 1) = cxd(0, -delta_tau) * cxd(0, -h);   // -i dt (-i h)
      }
      if (m > 1) sec.lu.compute(u);
      sectors_.push_back(std::move(sec));
    }
  }

  double step() {
    Eigen::MatrixXcd prev = state_;
    for (const Sector& sec : sectors_) {
      const int m = static_cast<int>(sec.p.size());
      if (m < 2) continue;
      Eigen::VectorXcd v(m);
      for (int i = 0; i < m; ++i) v(i) = state_(sec.p[i], sec.s[i]);
      Eigen::VectorXcd w = sec.lu.solve(v);
      for (int i = 0; i < m; ++i) state_(sec.p[i], sec.s[i]) = w(i);
    }
    last_residual_ = residual_vs(prev);
    norm_before_renorm_ = state_.norm();
    if (renormalize_) state_ /= norm_before_renorm_;
    ++step_count_;
    return last_residual_;
  }

  TrajectoryRecord observe(int n_ref_bits = 25, int n_total_bits = 25) const {
    TrajectoryRecord r;
    r.step = step_count_;
    r.tau = step_count_ * delta_tau_;
    for (int p = 0; p < np_; ++p)
      for (int s = 0; s < ns_; ++s) {
        const double w = std::norm(state_(p, s));
        r.n_pump += p * w;
        r.n_signal += s * w;
      }
    r.energy = r.n_signal + 2.0 * r.n_pump;
    // X = (a + a^dag)/sqrt2 on the signal index
    cxd am = 0.0, a2 = 0.0;
    for (int p = 0; p < np_; ++p) {
      for (int s = 0; s + 1 < ns_; ++s)
        am += std::conj(state_(p, s)) * state_(p, s + 1) * std::sqrt(s + 1.0);
      for (int s = 0; s + 2 < ns_; ++s)
        a2 += std::conj(state_(p, s)) * state_(p, s + 2) * std::sqrt((s + 1.0) * (s + 2.0));
    }
    const double xm = std::sqrt(2.0) * std::real(am);
    const double x2 = std::real(a2) + r.n_signal + 0.5;
    r.var_x_signal = x2 - xm * xm;
    r.max_bond = -1;
    r.param_count = -1;
    r.inverse_compression = -1.0;
    r.residual_raw = last_residual_;
    r.residual_normalized = last_residual_ / std::exp2(0.5 * (n_total_bits - n_ref_bits));
    r.norm_drift = norm_before_renorm_ - 1.0;
    return r;
  }

  // Reduced density matrices by partial trace; entries beyond the requested
  // cutoff are dropped.
  FockDensityMatrix reduced_pump(int cutoff) const {
    FockDensityMatrix d;
    d.cutoff = cutoff;
    const int m = std::min(cutoff, np_);
    d.rho = Eigen::MatrixXcd::Zero(cutoff, cutoff);
    d.rho.topLeftCorner(m, m) = (state_ * state_.adjoint()).topLeftCorner(m, m);
    d.captured_weight = std::real(d.rho.trace());
    return d;
  }
  FockDensityMatrix reduced_signal(int cutoff) const {
    FockDensityMatrix d;
    d.cutoff = cutoff;
    const int m = std::min(cutoff, ns_);
    d.rho = Eigen::MatrixXcd::Zero(cutoff, cutoff);
    d.rho.topLeftCorner(m, m) = (state_.transpose() * state_.conjugate()).topLeftCorner(m, m);
    d.captured_weight = std::real(d.rho.trace());
    return d;
  }

  // Probability weight in the top Fock levels; > 1e-6 means the cutoff
  // saturated.
  double top_level_occupation() const {
    return std::max(state_.row(np_ - 1).squaredNorm(), state_.col(ns_ - 1).squaredNorm());
  }
  bool cutoff_saturated() const { return top_level_occupation() > 1e-6; }

  const Eigen::MatrixXcd& state() const { return state_; }

 private:
  double residual_vs(const Eigen::MatrixXcd& prev) const {
    // || U psi_new - psi_prev || with U = I - i dt H applied analytically
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(np_, ns_);
    for (int p = 0; p < np_; ++p)
      for (int s = 0; s < ns_; ++s) {
        cxd acc = 0.0;
        // H = i (a_p as^dag as^dag - a_p^dag as as)
        if (p + 1 < np_ && s - 2 >= 0)
          acc += cxd(0, 1) * std::sqrt((p + 1.0) * (s - 1.0) * s) * state_(p + 1, s - 2);
        if (p - 1 >= 0 && s + 2 < ns_)
          acc += cxd(0, -1) * std::sqrt(double(p) * (s + 1.0) * (s + 2.0)) * state_(p - 1, s + 2);
        h(p, s) = acc;
      }
    return (state_ - cxd(0, delta_tau_) * h - prev).norm();
  }

  struct Sector {
    std::vector<int> p, s;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
  };

  int np_, ns_;
  double delta_tau_;
  bool renormalize_;
  Eigen::MatrixXcd state_;
  std::vector<Sector> sectors_;
  double last_residual_ = 0.0;
  double norm_before_renorm_ = 1.0;
  long long step_count_ = 0;
};

struct FockTrajectory {
  std::vector<TrajectoryRecord> records;
  std::vector<FockDensityMatrix> rho_pump, rho_signal;
  bool cutoff_warning = false;
};

inline FockTrajectory fock_evolve(double alpha, int cutoff_pump, int cutoff_signal,
                                  const EvolutionConfig& ecfg, int density_cutoff_pump = 0,
                                  int density_cutoff_signal = 0) {
  ecfg.validate();
  FockEvolver ev(alpha, cutoff_pump, cutoff_signal, ecfg.delta_tau, ecfg.renormalize_each_step);
  FockTrajectory out;
  auto snapshot = [&]() {
    out.records.push_back(ev.observe(ecfg.n_ref_bits));
    if (density_cutoff_pump > 0) out.rho_pump.push_back(ev.reduced_pump(density_cutoff_pump));
    if (density_cutoff_signal > 0)
      out.rho_signal.push_back(ev.reduced_signal(density_cutoff_signal));
    out.cutoff_warning = out.cutoff_warning || ev.cutoff_saturated();
  };
  snapshot();
  for (long long s = 1; s <= ecfg.n_steps; ++s) {
    ev.step();
    if (s % ecfg.observe_every == 0 || s == ecfg.n_steps) snapshot();
  }
  return out;
}

// Field-by-field comparison of two aligned trajectories.
struct TrajectoryTolerances {
  double n_pump_abs = 1e-3;
  double n_signal_abs = 1e-3;
  double energy_rel = 1e-3;
  double var_x_abs = 1e-3;
};

struct TrajectoryComparison {
  double max_n_pump_dev = 0.0;
  double max_n_signal_dev = 0.0;
  double max_energy_rel_dev = 0.0;
  double max_var_x_dev = 0.0;
  bool pass = true;
  std::string first_failure;
};

inline TrajectoryComparison compare_trajectories(const std::vector<TrajectoryRecord>& a,
                                                 const std::vector<TrajectoryRecord>& b,
                                                 const TrajectoryTolerances& tol) {
  if (a.size() != b.size()) throw std::invalid_argument("compare_trajectories: length mismatch");
  TrajectoryComparison c;
  auto fail = [&](const std::string& field, long long step) {
    if (c.pass) c.first_failure = field + " at step " + std::to_string(step);
    c.pass = false;
  };
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step)
      throw std::invalid_argument("compare_trajectories: misaligned steps");
    const double dnp = std::abs(a[i].n_pump - b[i].n_pump);
    const double dns = std::abs(a[i].n_signal - b[i].n_signal);
    const double de = std::abs(a[i].energy - b[i].energy) / std::max(1.0, std::abs(b[i].energy));
    const double dv = std::abs(a[i].var_x_signal - b[i].var_x_signal);
    c.max_n_pump_dev = std::max(c.max_n_pump_dev, dnp);
    c.max_n_signal_dev = std::max(c.max_n_signal_dev, dns);
    c.max_energy_rel_dev = std::max(c.max_energy_rel_dev, de);
    c.max_var_x_dev = std::max(c.max_var_x_dev, dv);
    if (dnp > tol.n_pump_abs) fail("n_pump", a[i].step);
    if (dns > tol.n_signal_abs) fail("n_signal", a[i].step);
    if (de > tol.energy_rel) fail("energy", a[i].step);
    if (dv > tol.var_x_abs) fail("var_x_signal", a[i].step);
  }
  return c;
}

}  // namespace qtt
