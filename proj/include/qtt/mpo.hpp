#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <utility>
#include <vector>

#include "qtt/common.hpp"
#include "qtt/mps.hpp"
#include "qtt/truncation.hpp"

namespace qtt {

// One order-4 MPO tensor of shape (left, 2, 2, right), stored as slices
// w[i][j] with i the output (bra) and j the input (ket) physical index.
struct MpoSite {
  std::array<std::array<Eigen::MatrixXcd, 2>, 2> w;

  Eigen::Index left() const { return w[0][0].rows(); }
  Eigen::Index right() const { return w[0][0].cols(); }

  // The 2x2 physical block for a fixed pair of bond indices.
  Eigen::Matrix2cd phys_block(Eigen::Index a, Eigen::Index b) const {
    Eigen::Matrix2cd m;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = w[i][j](a, b);
    return m;
  }

  // Vertical stack of the four slices in (i,j) order, rows (p*left + l).
  Eigen::MatrixXcd merged_left() const {
    Eigen::MatrixXcd m(4 * left(), right());
    for (int p = 0; p < 4; ++p) m.middleRows(p * left(), left()) = w[p / 2][p % 2];
    return m;
  }
  Eigen::MatrixXcd merged_right() const {
    Eigen::MatrixXcd m(left(), 4 * right());
    for (int p = 0; p < 4; ++p) m.middleCols(p * right(), right()) = w[p / 2][p % 2];
    return m;
  }
  static MpoSite from_merged_left(const Eigen::MatrixXcd& m) {
    MpoSite s;
    const Eigen::Index l = m.rows() / 4;
    for (int p = 0; p < 4; ++p) s.w[p / 2][p % 2] = m.middleRows(p * l, l);
    return s;
  }
  static MpoSite from_merged_right(const Eigen::MatrixXcd& m) {
    MpoSite s;
    const Eigen::Index r = m.cols() / 4;
    for (int p = 0; p < 4; ++p) s.w[p / 2][p % 2] = m.middleCols(p * r, r);
    return s;
  }
};

// Matrix product operator over binary sites, same MSB-first convention as Mps.
struct Mpo {
  std::vector<MpoSite> sites;

  int n_sites() const { return static_cast<int>(sites.size()); }
  int max_bond() const {
    Eigen::Index m = 1;
    for (const auto& s : sites) m = std::max(m, s.right());
    return static_cast<int>(m);
  }
  void check_consistent() const {
    if (sites.empty()) throw std::invalid_argument("Mpo: needs at least one site");
    if (sites.front().left() != 1 || sites.back().right() != 1)
      throw std::invalid_argument("Mpo: boundary bonds must be 1");
    for (size_t j = 0; j + 1 < sites.size(); ++j)
      if (sites[j].right() != sites[j + 1].left())
        throw std::invalid_argument("Mpo: bond dimension chain mismatch");
  }
};

inline MpoSite mpo_site_scalar(const Eigen::Matrix2cd& m) {
  MpoSite s;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      s.w[i][j] = Eigen::MatrixXcd(1, 1);
      s.w[i][j](0, 0) = m(i, j);
    }
  return s;
}

inline Mpo mpo_identity(int n_sites) {
  Mpo op;
  op.sites.assign(n_sites, mpo_site_scalar(Eigen::Matrix2cd::Identity()));
  return op;
}

inline Mps mpo_apply(const Mpo& op, const Mps& psi) {
  detail::require_same_sites(op.n_sites(), psi.n_sites(), "mpo_apply");
  Mps out;
  out.sites.resize(psi.n_sites());
  for (int s = 0; s < psi.n_sites(); ++s) {
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXcd acc = Eigen::kroneckerProduct(op.sites[s].w[i][0], psi.sites[s].a[0]);
      acc += Eigen::kroneckerProduct(op.sites[s].w[i][1], psi.sites[s].a[1]);
      out.sites[s].a[i] = std::move(acc);
    }
  }
  return out;
}

inline Mpo mpo_add(const Mpo& a, const Mpo& b, cxd ca = 1.0, cxd cb = 1.0) {
  detail::require_same_sites(a.n_sites(), b.n_sites(), "mpo_add");
  const int n = a.n_sites();
  Mpo out;
  out.sites.resize(n);
  for (int s = 0; s < n; ++s) {
    const bool first = (s == 0), last = (s == n - 1);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const Eigen::MatrixXcd& wa = a.sites[s].w[i][j];
        const Eigen::MatrixXcd& wb = b.sites[s].w[i][j];
        cxd fa = first ? ca : 1.0, fb = first ? cb : 1.0;
        if (n == 1) {
          out.sites[s].w[i][j] = ca * wa + cb * wb;
        } else if (first) {
          Eigen::MatrixXcd m(1, wa.cols() + wb.cols());
          m.leftCols(wa.cols()) = fa * wa;
          m.rightCols(wb.cols()) = fb * wb;
          out.sites[s].w[i][j] = m;
        } else if (last) {
          Eigen::MatrixXcd m(wa.rows() + wb.rows(), 1);
          m.topRows(wa.rows()) = wa;
          m.bottomRows(wb.rows()) = wb;
          out.sites[s].w[i][j] = m;
        } else {
          Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(wa.rows() + wb.rows(), wa.cols() + wb.cols());
          m.topLeftCorner(wa.rows(), wa.cols()) = wa;
          m.bottomRightCorner(wb.rows(), wb.cols()) = wb;
          out.sites[s].w[i][j] = m;
        }
      }
  }
  return out;
}

// Operator product a*b (a acts second); bonds multiply.
inline Mpo mpo_mul(const Mpo& a, const Mpo& b) {
  detail::require_same_sites(a.n_sites(), b.n_sites(), "mpo_mul");
  Mpo out;
  out.sites.resize(a.n_sites());
  for (int s = 0; s < a.n_sites(); ++s) {
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) {
        Eigen::MatrixXcd acc =
            Eigen::kroneckerProduct(a.sites[s].w[i][0], b.sites[s].w[0][k]);
        acc += Eigen::kroneckerProduct(a.sites[s].w[i][1], b.sites[s].w[1][k]);
        out.sites[s].w[i][k] = std::move(acc);
      }
  }
  return out;
}

inline Mpo mpo_adjoint(const Mpo& op) {
  Mpo out;
  out.sites.resize(op.n_sites());
  for (int s = 0; s < op.n_sites(); ++s)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out.sites[s].w[i][j] = op.sites[s].w[j][i].conjugate();
  return out;
}

namespace detail {

inline void mpo_push_right(Mpo& op, int j) {
  Eigen::MatrixXcd m = op.sites[j].merged_left();
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.rows(), k);
  Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  op.sites[j] = MpoSite::from_merged_left(q);
  for (auto& row : op.sites[j + 1].w)
    for (auto& slice : row) slice = (r * slice).eval();
}

inline void mpo_push_left(Mpo& op, int j) {
  Eigen::MatrixXcd m = op.sites[j].merged_right();
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m.adjoint());
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.cols(), k);
  Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  op.sites[j] = MpoSite::from_merged_right(q.adjoint());
  Eigen::MatrixXcd l = r.adjoint();
  for (auto& row : op.sites[j - 1].w)
    for (auto& slice : row) slice = (slice * l).eval();
}

}  // namespace detail

// SVD rounding of operator bonds, same error accounting as state truncation
// (the MPO is treated as a chain with physical dimension 4).
inline Mpo mpo_truncate(const Mpo& op, const TruncationPolicy& policy) {
  Mpo out = op;
  for (int j = out.n_sites() - 1; j > 0; --j) detail::mpo_push_left(out, j);
  for (int j = 0; j + 1 < out.n_sites(); ++j) {
    SvdSplit sp = svd_split(out.sites[j].merged_left(), policy);
    out.sites[j] = MpoSite::from_merged_left(sp.u);
    Eigen::MatrixXcd carry = sp.sv.asDiagonal() * sp.vh;
    for (auto& row : out.sites[j + 1].w)
      for (auto& slice : row) slice = (carry * slice).eval();
  }
  return out;
}

inline double mpo_frobenius_norm(const Mpo& op) {
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  for (int s = 0; s < op.n_sites(); ++s) {
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(op.sites[s].right(), op.sites[s].right());
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        next.noalias() += op.sites[s].w[i][j].adjoint() * env * op.sites[s].w[i][j];
    env.swap(next);
  }
  return std::sqrt(std::max(0.0, std::real(env(0, 0))));
}

// Dense matrix of the operator, assembled meeting in the middle so peak
// memory stays near the final matrix size.
inline Eigen::MatrixXcd mpo_to_dense(const Mpo& op) {
  const int n = op.n_sites();
  if (n > kMaxDenseOperatorBits)
    throw resource_limit_error("mpo_to_dense: more than " +
                               std::to_string(kMaxDenseOperatorBits) + " bits");
  const int n_left = n / 2;
  // Left half: blocks indexed by the bond after the last expanded site.
  std::vector<Eigen::MatrixXcd> left{Eigen::MatrixXcd::Ones(1, 1)};
  for (int s = 0; s < n_left; ++s) {
    const Eigen::Index sr = op.sites[s].right();
    std::vector<Eigen::MatrixXcd> next(sr);
    for (Eigen::Index b = 0; b < sr; ++b) {
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(2 * left[0].rows(), 2 * left[0].cols());
      for (Eigen::Index a = 0; a < op.sites[s].left(); ++a)
        acc += Eigen::kroneckerProduct(left[a], op.sites[s].phys_block(a, b)).eval();
      next[b] = std::move(acc);
    }
    left.swap(next);
  }
  // Right half: expanded from the right edge, blocks indexed by the bond
  // before the first expanded site (the middle bond at the end).
  std::vector<Eigen::MatrixXcd> right{Eigen::MatrixXcd::Ones(1, 1)};
  for (int s = n - 1; s >= n_left; --s) {
    const Eigen::Index sl = op.sites[s].left();
    std::vector<Eigen::MatrixXcd> next(sl);
    for (Eigen::Index a = 0; a < sl; ++a) {
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(2 * right[0].rows(), 2 * right[0].cols());
      for (Eigen::Index b = 0; b < op.sites[s].right(); ++b)
        acc += Eigen::kroneckerProduct(op.sites[s].phys_block(a, b), right[b]).eval();
      next[a] = std::move(acc);
    }
    right.swap(next);
  }
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(dim, dim);
  for (size_t a = 0; a < left.size(); ++a)
    dense += Eigen::kroneckerProduct(left[a], right[a]).eval();
  return dense;
}

// <bra| op |ket> by a single three-layer sweep.
inline cxd matrix_element(const Mps& bra, const Mpo& op, const Mps& ket) {
  detail::require_same_sites(bra.n_sites(), op.n_sites(), "matrix_element");
  detail::require_same_sites(bra.n_sites(), ket.n_sites(), "matrix_element");
  std::vector<Eigen::MatrixXcd> env{Eigen::MatrixXcd::Ones(1, 1)};
  for (int s = 0; s < bra.n_sites(); ++s) {
    const auto& w = op.sites[s];
    const Eigen::Index sr = w.right();
    std::vector<Eigen::MatrixXcd> next(
        sr, Eigen::MatrixXcd::Zero(bra.sites[s].right(), ket.sites[s].right()));
    for (Eigen::Index a = 0; a < w.left(); ++a) {
      std::array<Eigen::MatrixXcd, 2> ek;
      for (int j = 0; j < 2; ++j) ek[j] = env[a] * ket.sites[s].a[j];
      for (int i = 0; i < 2; ++i) {
        std::array<Eigen::MatrixXcd, 2> bik;
        for (int j = 0; j < 2; ++j) bik[j] = bra.sites[s].a[i].adjoint() * ek[j];
        for (Eigen::Index b = 0; b < sr; ++b)
          for (int j = 0; j < 2; ++j) {
            const cxd c = w.w[i][j](a, b);
            if (c != 0.0) next[b].noalias() += c * bik[j];
          }
      }
    }
    env.swap(next);
  }
  return env[0](0, 0);
}

inline cxd expectation(const Mps& psi, const Mpo& op) { return matrix_element(psi, op, psi); }

// ||op * psi||^2 without forming the intermediate state.
inline double apply_norm_sq(const Mpo& op, const Mps& psi) {
  detail::require_same_sites(op.n_sites(), psi.n_sites(), "apply_norm_sq");
  const int n = psi.n_sites();
  // env[(a,b)] over the bra-layer x ket-layer MPO bonds.
  Eigen::Index sl = 1;
  std::vector<Eigen::MatrixXcd> env{Eigen::MatrixXcd::Ones(1, 1)};
  for (int s = 0; s < n; ++s) {
    const auto& w = op.sites[s];
    const Eigen::Index wl = w.left(), wr = w.right();
    const Eigen::Index pr = psi.sites[s].right();
    std::vector<Eigen::MatrixXcd> next(wr * wr, Eigen::MatrixXcd::Zero(pr, pr));
    for (Eigen::Index a = 0; a < wl; ++a)
      for (Eigen::Index b = 0; b < wl; ++b) {
        const Eigen::MatrixXcd& e = env[a * sl + b];
        std::array<std::array<Eigen::MatrixXcd, 2>, 2> p;
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k)
            p[j][k] = psi.sites[s].a[j].adjoint() * e * psi.sites[s].a[k];
        for (Eigen::Index a2 = 0; a2 < wr; ++a2)
          for (Eigen::Index b2 = 0; b2 < wr; ++b2) {
            Eigen::Matrix2cd coeff = Eigen::Matrix2cd::Zero();
            for (int i = 0; i < 2; ++i)
              for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                  coeff(j, k) += std::conj(w.w[i][j](a, a2)) * w.w[i][k](b, b2);
            Eigen::MatrixXcd& t = next[a2 * wr + b2];
            for (int j = 0; j < 2; ++j)
              for (int k = 0; k < 2; ++k)
                if (coeff(j, k) != 0.0) t.noalias() += coeff(j, k) * p[j][k];
          }
      }
    env.swap(next);
    sl = wr;
  }
  return std::max(0.0, std::real(env[0](0, 0)));
}

}  // namespace qtt
