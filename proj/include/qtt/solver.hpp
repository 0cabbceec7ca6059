#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "qtt/common.hpp"
#include "qtt/mpo.hpp"
#include "qtt/mps.hpp"
#include "qtt/truncation.hpp"

namespace qtt {

struct SolverConfig {
  int max_sweeps = 8;                // one sweep = one edge-to-edge pass
  double rel_residual_tol = 1e-8;    // stop when ||Ux-b||/||b|| falls below
  double rel_improvement_tol = 0.01; // or when a pass improves it by less than this fraction
  TruncationPolicy truncation{30, 1e-12};
  // Local systems at or below this dimension are assembled densely and
  // LU-solved; larger ones go through matrix-free GMRES with a Jacobi
  // preconditioner, falling back to the dense path if GMRES stalls.
  int dense_solve_max_dim = 900;
  int gmres_max_iters = 240;
  double gmres_rel_tol = 1e-11;
  double condition_limit = 1e14;

  void validate() const {
    if (max_sweeps < 1) throw std::invalid_argument("SolverConfig: max_sweeps must be >= 1");
    if (rel_residual_tol <= 0.0)
      throw std::invalid_argument("SolverConfig: rel_residual_tol must be > 0");
    truncation.validate();
  }
};

struct StepReport {
  double residual_raw = 0.0;         // ||U psi - rhs||
  double residual_normalized = 0.0;  // residual_raw / sqrt(N), filled by the evolution loop
  int sweeps_used = 0;
  int max_bond = 1;
  double norm_before_renorm = 1.0;
  bool converged = true;
  double discarded_weight = 0.0;
};

namespace detail {

using OpEnv = std::vector<Eigen::MatrixXcd>;  // one (bra x ket) block per MPO bond

inline OpEnv advance_op_env_left(const OpEnv& env, const MpoSite& w, const MpsSite& bra,
                                 const MpsSite& ket) {
  const Eigen::Index wr = w.right();
  OpEnv next(wr, Eigen::MatrixXcd::Zero(bra.right(), ket.right()));
  for (Eigen::Index a = 0; a < w.left(); ++a) {
    std::array<Eigen::MatrixXcd, 2> ek;
    for (int j = 0; j < 2; ++j) ek[j] = env[a] * ket.a[j];
    for (int i = 0; i < 2; ++i) {
      std::array<Eigen::MatrixXcd, 2> bik;
      for (int j = 0; j < 2; ++j) bik[j] = bra.a[i].adjoint() * ek[j];
      for (Eigen::Index b = 0; b < wr; ++b)
        for (int j = 0; j < 2; ++j) {
          const cxd c = w.w[i][j](a, b);
          if (c != 0.0) next[b].noalias() += c * bik[j];
        }
    }
  }
  return next;
}

inline OpEnv advance_op_env_right(const OpEnv& env, const MpoSite& w, const MpsSite& bra,
                                  const MpsSite& ket) {
  const Eigen::Index wl = w.left();
  OpEnv next(wl, Eigen::MatrixXcd::Zero(bra.left(), ket.left()));
  for (Eigen::Index b = 0; b < w.right(); ++b) {
    std::array<Eigen::MatrixXcd, 2> ek;
    for (int j = 0; j < 2; ++j) ek[j] = env[b] * ket.a[j].transpose();
    for (int i = 0; i < 2; ++i) {
      std::array<Eigen::MatrixXcd, 2> bik;
      for (int j = 0; j < 2; ++j) bik[j] = bra.a[i].conjugate() * ek[j];
      for (Eigen::Index a = 0; a < wl; ++a)
        for (int j = 0; j < 2; ++j) {
          const cxd c = w.w[i][j](a, b);
          if (c != 0.0) next[a].noalias() += c * bik[j];
        }
    }
  }
  return next;
}

inline Eigen::MatrixXcd advance_vec_env_left(const Eigen::MatrixXcd& env, const MpsSite& bra,
                                             const MpsSite& ket) {
  Eigen::MatrixXcd next = bra.a[0].adjoint() * env * ket.a[0];
  next.noalias() += bra.a[1].adjoint() * env * ket.a[1];
  return next;
}

inline Eigen::MatrixXcd advance_vec_env_right(const Eigen::MatrixXcd& env, const MpsSite& bra,
                                              const MpsSite& ket) {
  Eigen::MatrixXcd next = bra.a[0].conjugate() * env * ket.a[0].transpose();
  next.noalias() += bra.a[1].conjugate() * env * ket.a[1].transpose();
  return next;
}

// The projected two-site operator sum_b ML[b] (.) MR[b]^T and projected rhs.
struct LocalMaps {
  std::vector<Eigen::MatrixXcd> ml;  // (2rl x 2rl) per middle MPO bond
  std::vector<Eigen::MatrixXcd> mr;  // (2rr x 2rr)
  Eigen::MatrixXcd rhs;              // (2rl x 2rr)
  Eigen::Index rl = 0, rr = 0;

  Eigen::Index dim() const { return 4 * rl * rr; }

  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& m) const {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m.rows(), m.cols());
    for (size_t b = 0; b < ml.size(); ++b) out.noalias() += ml[b] * m * mr[b].transpose();
    return out;
  }

  Eigen::MatrixXcd assemble_dense() const {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(dim(), dim());
    for (size_t b = 0; b < ml.size(); ++b)
      u += Eigen::kroneckerProduct(mr[b], ml[b]).eval();
    return u;
  }

  Eigen::VectorXcd diagonal() const {
    Eigen::VectorXcd d = Eigen::VectorXcd::Zero(dim());
    for (size_t b = 0; b < ml.size(); ++b) {
      Eigen::VectorXcd dl = ml[b].diagonal();
      Eigen::VectorXcd dr = mr[b].diagonal();
      for (Eigen::Index q = 0; q < dr.size(); ++q)
        d.segment(q * dl.size(), dl.size()) += dr(q) * dl;
    }
    return d;
  }
};

inline LocalMaps build_local_maps(const OpEnv& lop, const OpEnv& rop, const MpoSite& w1,
                                  const MpoSite& w2, const Eigen::MatrixXcd& lrhs,
                                  const Eigen::MatrixXcd& rrhs, const MpsSite& b1,
                                  const MpsSite& b2) {
  LocalMaps maps;
  maps.rl = lop[0].rows();
  maps.rr = rop[0].rows();
  const Eigen::Index sm = w1.right();
  maps.ml.assign(sm, Eigen::MatrixXcd::Zero(2 * maps.rl, 2 * maps.rl));
  maps.mr.assign(sm, Eigen::MatrixXcd::Zero(2 * maps.rr, 2 * maps.rr));
  for (Eigen::Index b = 0; b < sm; ++b) {
    for (int i = 0; i < 2; ++i)
      for (int i2 = 0; i2 < 2; ++i2)
        for (Eigen::Index a = 0; a < w1.left(); ++a) {
          const cxd c = w1.w[i][i2](a, b);
          if (c != 0.0) maps.ml[b].block(i * maps.rl, i2 * maps.rl, maps.rl, maps.rl) += c * lop[a];
        }
    for (int j = 0; j < 2; ++j)
      for (int j2 = 0; j2 < 2; ++j2)
        for (Eigen::Index c2 = 0; c2 < w2.right(); ++c2) {
          const cxd c = w2.w[j][j2](b, c2);
          if (c != 0.0) maps.mr[b].block(j * maps.rr, j2 * maps.rr, maps.rr, maps.rr) += c * rop[c2];
        }
  }
  maps.rhs.resize(2 * maps.rl, 2 * maps.rr);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      maps.rhs.block(i * maps.rl, j * maps.rr, maps.rl, maps.rr) =
          lrhs * b1.a[i] * b2.a[j] * rrhs.transpose();
  return maps;
}

struct GmresOutcome {
  bool converged = false;
  int iters = 0;
};

// Plain full-history GMRES with right diagonal preconditioning.
template <typename ApplyFn>
GmresOutcome gmres_solve(const ApplyFn& apply, const Eigen::VectorXcd& dinv,
                         const Eigen::VectorXcd& b, Eigen::VectorXcd& x, int max_iters,
                         double rel_tol) {
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    return {true, 0};
  }
  Eigen::VectorXcd r = b - apply(x);
  double beta = r.norm();
  if (beta <= rel_tol * bnorm) return {true, 0};

  const int m = max_iters;
  std::vector<Eigen::VectorXcd> v;
  v.reserve(m + 1);
  v.push_back(r / beta);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m + 1, m);
  Eigen::VectorXcd cs(m), sn(m);
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
  g(0) = beta;

  int k = 0;
  while (k < m) {
    Eigen::VectorXcd w = apply(dinv.cwiseProduct(v[k]));
    for (int i = 0; i <= k; ++i) {
      h(i, k) = v[i].dot(w);
      w.noalias() -= h(i, k) * v[i];
    }
    const double wnorm = w.norm();
    h(k + 1, k) = wnorm;
    const bool happy = wnorm <= 1e-300;
    if (!happy) v.push_back(w / wnorm);
    for (int i = 0; i < k; ++i) {
      const cxd t = std::conj(cs(i)) * h(i, k) + std::conj(sn(i)) * h(i + 1, k);
      h(i + 1, k) = -sn(i) * h(i, k) + cs(i) * h(i + 1, k);
      h(i, k) = t;
    }
    const double denom = std::sqrt(std::norm(h(k, k)) + std::norm(h(k + 1, k)));
    if (denom < 1e-300) break;
    cs(k) = h(k, k) / denom;
    sn(k) = h(k + 1, k) / denom;
    h(k, k) = std::conj(cs(k)) * h(k, k) + std::conj(sn(k)) * h(k + 1, k);
    h(k + 1, k) = 0.0;
    g(k + 1) = -sn(k) * g(k);
    g(k) = std::conj(cs(k)) * g(k);
    ++k;
    if (std::abs(g(k)) <= rel_tol * bnorm || happy) break;
  }
  // back-substitution on the k x k triangular system
  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(k);
  for (int i = k - 1; i >= 0; --i) {
    cxd s = g(i);
    for (int j = i + 1; j < k; ++j) s -= h(i, j) * y(j);
    y(i) = s / h(i, i);
  }
  Eigen::VectorXcd z = Eigen::VectorXcd::Zero(x.size());
  for (int i = 0; i < k; ++i) z.noalias() += y(i) * v[i];
  x.noalias() += dinv.cwiseProduct(z);

  const double final_res = (b - apply(x)).norm();
  return {final_res <= 2.0 * rel_tol * bnorm + 1e-300, k};
}

}  // namespace detail

// Two-site tensor split by SVD: the left site comes back left-orthogonal,
// the singular values are absorbed to the right. theta rows are (i*rl + l),
// columns (j*rr + r).
struct TwoSiteSplit {
  MpsSite left;
  MpsSite right;
  double discarded_weight = 0.0;
};

inline TwoSiteSplit split_two_site(const Eigen::MatrixXcd& theta, const TruncationPolicy& policy) {
  SvdSplit sp = svd_split(theta, policy);
  TwoSiteSplit out;
  out.left = MpsSite::from_merged_left(sp.u);
  out.right = MpsSite::from_merged_right(Eigen::MatrixXcd(sp.sv.asDiagonal() * sp.vh));
  out.discarded_weight = sp.discarded_weight;
  return out;
}

// Dense reduced system for the pair (site_pair, site_pair+1) in the frames of
// psi: U' x = b with x the vectorized two-site tensor in (left bond, bit i,
// bit j, right bond) order, left bond most significant. On a two-site chain
// this ordering makes U' literally the dense operator.
inline std::pair<Eigen::MatrixXcd, Eigen::VectorXcd> assemble_local_system(const Mpo& op,
                                                                           const Mps& rhs,
                                                                           const Mps& psi,
                                                                           int site_pair) {
  detail::require_same_sites(op.n_sites(), psi.n_sites(), "assemble_local_system");
  detail::require_same_sites(op.n_sites(), rhs.n_sites(), "assemble_local_system");
  const int n = psi.n_sites();
  if (site_pair < 0 || site_pair + 1 >= n)
    throw std::invalid_argument("assemble_local_system: pair index out of range");
  Mps x = psi;
  if (!x.canonical_center || *x.canonical_center < site_pair || *x.canonical_center > site_pair + 1)
    x = canonicalize(std::move(x), site_pair);

  detail::OpEnv lop{Eigen::MatrixXcd::Ones(1, 1)};
  Eigen::MatrixXcd lrhs = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = 0; j < site_pair; ++j) {
    lop = detail::advance_op_env_left(lop, op.sites[j], x.sites[j], x.sites[j]);
    lrhs = detail::advance_vec_env_left(lrhs, x.sites[j], rhs.sites[j]);
  }
  detail::OpEnv rop{Eigen::MatrixXcd::Ones(1, 1)};
  Eigen::MatrixXcd rrhs = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = n - 1; j > site_pair + 1; --j) {
    rop = detail::advance_op_env_right(rop, op.sites[j], x.sites[j], x.sites[j]);
    rrhs = detail::advance_vec_env_right(rrhs, x.sites[j], rhs.sites[j]);
  }
  detail::LocalMaps maps =
      detail::build_local_maps(lop, rop, op.sites[site_pair], op.sites[site_pair + 1], lrhs, rrhs,
                               rhs.sites[site_pair], rhs.sites[site_pair + 1]);
  Eigen::MatrixXcd u_int = maps.assemble_dense();
  Eigen::VectorXcd b_int = Eigen::Map<const Eigen::VectorXcd>(maps.rhs.data(), maps.rhs.size());

  // permute from the internal column-major layout to (l, i, j, r) order
  const Eigen::Index rl = maps.rl, rr = maps.rr;
  const Eigen::Index dim = maps.dim();
  Eigen::VectorXi perm(dim);
  for (Eigen::Index l = 0; l < rl; ++l)
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        for (Eigen::Index r = 0; r < rr; ++r) {
          const Eigen::Index pub = ((l * 2 + i) * 2 + j) * rr + r;
          const Eigen::Index internal = (j * rr + r) * (2 * rl) + (i * rl + l);
          perm(pub) = static_cast<int>(internal);
        }
  Eigen::MatrixXcd u(dim, dim);
  Eigen::VectorXcd b(dim);
  for (Eigen::Index p = 0; p < dim; ++p) {
    b(p) = b_int(perm(p));
    for (Eigen::Index q = 0; q < dim; ++q) u(p, q) = u_int(perm(p), perm(q));
  }
  return {u, b};
}

// ||U psi - rhs||. Uses an explicit difference state when bonds are small
// (exact cancellation for bitwise-equal inputs), otherwise the expanded form
// <Ux|Ux> - 2 Re <b|Ux> + <b|b>.
inline double linear_residual(const Mpo& op, const Mps& psi, const Mps& rhs) {
  const long cost = static_cast<long>(psi.max_bond()) * op.max_bond() + rhs.max_bond();
  if (cost <= 128) {
    Mps r = add(rhs, mpo_apply(op, psi), 1.0, -1.0);
    return norm(r);
  }
  const double t1 = apply_norm_sq(op, psi);
  const cxd t2 = matrix_element(rhs, op, psi);
  const double t3 = std::real(inner(rhs, rhs));
  return std::sqrt(std::max(0.0, t1 - 2.0 * std::real(t2) + t3));
}

// Residual of the per-step linear system, raw and grid-normalized:
// normalized = raw / sqrt(2^(n_total - n_ref_bits)).
inline std::pair<double, double> residual_norm(const Mpo& op, const Mps& psi_next,
                                               const Mps& psi_prev, int n_ref_bits = 25) {
  detail::require_same_sites(op.n_sites(), psi_next.n_sites(), "residual_norm");
  detail::require_same_sites(op.n_sites(), psi_prev.n_sites(), "residual_norm");
  const double raw = linear_residual(op, psi_next, psi_prev);
  const double factor = std::exp2(0.5 * (psi_next.n_sites() - n_ref_bits));
  return {raw, raw / factor};
}

// Solve op * x = rhs by alternating two-site sweeps (one sweep = one
// edge-to-edge pass), warm-started from guess.
inline std::pair<Mps, StepReport> solve_linear(const Mpo& op, const Mps& rhs, const Mps& guess,
                                               const SolverConfig& cfg) {
  cfg.validate();
  detail::require_same_sites(op.n_sites(), rhs.n_sites(), "solve_linear");
  detail::require_same_sites(op.n_sites(), guess.n_sites(), "solve_linear");
  const int n = op.n_sites();
  if (n < 2) throw std::invalid_argument("solve_linear: needs at least two sites");

  Mps x = canonicalize(guess, 0);
  StepReport report;

  const double bnorm = norm(rhs);
  if (bnorm == 0.0) throw std::invalid_argument("solve_linear: zero right-hand side");

  // lenv[k] covers sites [0,k), renv[k] covers [k,n).
  std::vector<detail::OpEnv> lenv(n + 1), renv(n + 1);
  std::vector<Eigen::MatrixXcd> lrhs(n + 1), rrhs(n + 1);
  lenv[0] = {Eigen::MatrixXcd::Ones(1, 1)};
  lrhs[0] = Eigen::MatrixXcd::Ones(1, 1);
  renv[n] = {Eigen::MatrixXcd::Ones(1, 1)};
  rrhs[n] = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = n - 1; j >= 2; --j) {
    renv[j] = detail::advance_op_env_right(renv[j + 1], op.sites[j], x.sites[j], x.sites[j]);
    rrhs[j] = detail::advance_vec_env_right(rrhs[j + 1], x.sites[j], rhs.sites[j]);
  }

  auto update_pair = [&](int k, bool moving_right) {
    detail::LocalMaps maps = detail::build_local_maps(lenv[k], renv[k + 2], op.sites[k],
                                                      op.sites[k + 1], lrhs[k], rrhs[k + 2],
                                                      rhs.sites[k], rhs.sites[k + 1]);
    const Eigen::Index rl = maps.rl, rr = maps.rr;
    Eigen::MatrixXcd theta(2 * rl, 2 * rr);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        theta.block(i * rl, j * rr, rl, rr) = x.sites[k].a[i] * x.sites[k + 1].a[j];

    Eigen::Map<Eigen::VectorXcd> tvec(theta.data(), theta.size());
    Eigen::Map<Eigen::VectorXcd> bvec(maps.rhs.data(), maps.rhs.size());
    bool solved = false;
    if (maps.dim() > cfg.dense_solve_max_dim) {
      auto apply = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
        Eigen::Map<const Eigen::MatrixXcd> m(v.data(), 2 * rl, 2 * rr);
        Eigen::MatrixXcd y = maps.apply(m);
        return Eigen::Map<Eigen::VectorXcd>(y.data(), y.size());
      };
      Eigen::VectorXcd diag = maps.diagonal();
      Eigen::VectorXcd dinv(diag.size());
      for (Eigen::Index q = 0; q < diag.size(); ++q)
        dinv(q) = std::abs(diag(q)) > 1e-300 ? 1.0 / diag(q) : 1.0;
      Eigen::VectorXcd xv = tvec;
      auto out = detail::gmres_solve(apply, dinv, Eigen::VectorXcd(bvec), xv,
                                     cfg.gmres_max_iters, cfg.gmres_rel_tol);
      if (out.converged) {
        tvec = xv;
        solved = true;
      }
    }
    if (!solved) {
      Eigen::MatrixXcd dense = maps.assemble_dense();
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(dense);
      const double rcond = lu.rcond();
      if (!(rcond > 1.0 / cfg.condition_limit))
        throw solver_breakdown_error("solve_linear: local system condition above limit at pair " +
                                     std::to_string(k));
      tvec = lu.solve(Eigen::VectorXcd(bvec));
    }

    SvdSplit sp = svd_split(theta, cfg.truncation);
    report.discarded_weight += sp.discarded_weight;
    if (moving_right) {
      x.sites[k] = MpsSite::from_merged_left(sp.u);
      x.sites[k + 1] = MpsSite::from_merged_right(Eigen::MatrixXcd(sp.sv.asDiagonal() * sp.vh));
      lenv[k + 1] = detail::advance_op_env_left(lenv[k], op.sites[k], x.sites[k], x.sites[k]);
      lrhs[k + 1] = detail::advance_vec_env_left(lrhs[k], x.sites[k], rhs.sites[k]);
      x.canonical_center = k + 1;
    } else {
      x.sites[k] = MpsSite::from_merged_left(Eigen::MatrixXcd(sp.u * sp.sv.asDiagonal()));
      x.sites[k + 1] = MpsSite::from_merged_right(sp.vh);
      renv[k + 1] =
          detail::advance_op_env_right(renv[k + 2], op.sites[k + 1], x.sites[k + 1], x.sites[k + 1]);
      rrhs[k + 1] = detail::advance_vec_env_right(rrhs[k + 2], x.sites[k + 1], rhs.sites[k + 1]);
      x.canonical_center = k;
    }
  };

  double prev_rel = std::numeric_limits<double>::infinity();
  report.converged = false;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const bool l2r = (sweep % 2 == 0);
    if (l2r)
      for (int k = 0; k <= n - 2; ++k) update_pair(k, true);
    else
      for (int k = n - 2; k >= 0; --k) update_pair(k, false);
    ++report.sweeps_used;

    const double raw = linear_residual(op, x, rhs);
    report.residual_raw = raw;
    const double rel = raw / bnorm;
    if (rel < cfg.rel_residual_tol) {
      report.converged = true;
      break;
    }
    if (prev_rel - rel < cfg.rel_improvement_tol * prev_rel) {
      report.converged = true;  // stagnated at the representation floor
      break;
    }
    prev_rel = rel;
  }
  report.max_bond = x.max_bond();
  report.residual_normalized = report.residual_raw;
  return {std::move(x), report};
}

}  // namespace qtt
