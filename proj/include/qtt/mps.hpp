#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "qtt/common.hpp"
#include "qtt/truncation.hpp"

namespace qtt {

// One order-3 MPS tensor of shape (left, 2, right), stored as the two
// physical-index slices a[0], a[1] of shape (left x right).
struct MpsSite {
  std::array<Eigen::MatrixXcd, 2> a;

  Eigen::Index left() const { return a[0].rows(); }
  Eigen::Index right() const { return a[0].cols(); }

  // Vertical stack [a0; a1], rows indexed by (i * left + l).
  Eigen::MatrixXcd merged_left() const {
    Eigen::MatrixXcd m(2 * left(), right());
    m.topRows(left()) = a[0];
    m.bottomRows(left()) = a[1];
    return m;
  }
  // Horizontal stack [a0 | a1], cols indexed by (i * right + r).
  Eigen::MatrixXcd merged_right() const {
    Eigen::MatrixXcd m(left(), 2 * right());
    m.leftCols(right()) = a[0];
    m.rightCols(right()) = a[1];
    return m;
  }
  static MpsSite from_merged_left(const Eigen::MatrixXcd& m) {
    MpsSite s;
    const Eigen::Index l = m.rows() / 2;
    s.a[0] = m.topRows(l);
    s.a[1] = m.bottomRows(l);
    return s;
  }
  static MpsSite from_merged_right(const Eigen::MatrixXcd& m) {
    MpsSite s;
    const Eigen::Index r = m.cols() / 2;
    s.a[0] = m.leftCols(r);
    s.a[1] = m.rightCols(r);
    return s;
  }
};

// Matrix product state over binary sites, most significant bit first:
// site 0 selects between the two halves of the encoded grid.
struct Mps {
  std::vector<MpsSite> sites;
  std::optional<int> canonical_center;

  int n_sites() const { return static_cast<int>(sites.size()); }

  int max_bond() const {
    Eigen::Index m = 1;
    for (const auto& s : sites) m = std::max(m, s.right());
    return static_cast<int>(m);
  }
  long long param_count() const {
    long long n = 0;
    for (const auto& s : sites) n += 2ll * s.left() * s.right();
    return n;
  }
  void check_consistent() const {
    if (sites.empty()) throw std::invalid_argument("Mps: needs at least one site");
    if (sites.front().left() != 1 || sites.back().right() != 1)
      throw std::invalid_argument("Mps: boundary bonds must be 1");
    for (size_t j = 0; j + 1 < sites.size(); ++j)
      if (sites[j].right() != sites[j + 1].left())
        throw std::invalid_argument("Mps: bond dimension chain mismatch");
  }
};

namespace detail {

inline void require_same_sites(int a, int b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": site-count mismatch");
}

// Left-orthogonalize site j, absorbing the R factor into site j+1.
inline void push_center_right(Mps& psi, int j) {
  auto& s = psi.sites[j];
  Eigen::MatrixXcd m = s.merged_left();
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.rows(), k);
  Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  psi.sites[j] = MpsSite::from_merged_left(q);
  for (auto& slice : psi.sites[j + 1].a) slice = (r * slice).eval();
}

// Right-orthogonalize site j, absorbing the L factor into site j-1.
inline void push_center_left(Mps& psi, int j) {
  auto& s = psi.sites[j];
  Eigen::MatrixXcd m = s.merged_right();
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m.adjoint());
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.cols(), k);
  Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  psi.sites[j] = MpsSite::from_merged_right(q.adjoint());
  Eigen::MatrixXcd l = r.adjoint();
  for (auto& slice : psi.sites[j - 1].a) slice = (slice * l).eval();
}

}  // namespace detail

inline Mps mps_from_dense(const Eigen::VectorXcd& amplitudes, const TruncationPolicy& policy) {
  const Eigen::Index len = amplitudes.size();
  if (len < 2 || (len & (len - 1)) != 0)
    throw std::invalid_argument("mps_from_dense: length must be a power of two >= 2");
  int n = 0;
  while ((Eigen::Index{1} << n) < len) ++n;
  if (n > kMaxDenseStateBits)
    throw resource_limit_error("mps_from_dense: more than " +
                               std::to_string(kMaxDenseStateBits) + " bits");

  Mps psi;
  psi.sites.resize(n);
  // "rest" holds the not-yet-factored tail: shape (bond x 2^(n-j)).
  Eigen::MatrixXcd rest = amplitudes.transpose();
  Eigen::Index bond = 1;
  for (int j = 0; j < n - 1; ++j) {
    const Eigen::Index half = rest.cols() / 2;
    Eigen::MatrixXcd m(2 * bond, half);
    m.topRows(bond) = rest.leftCols(half);      // bit j = 0 selects the first half
    m.bottomRows(bond) = rest.rightCols(half);  // bit j = 1 the second
    SvdSplit sp = svd_split(m, policy);
    psi.sites[j] = MpsSite::from_merged_left(sp.u);
    rest = sp.sv.asDiagonal() * sp.vh;
    bond = rest.rows();
  }
  psi.sites[n - 1].a[0] = rest.col(0);
  psi.sites[n - 1].a[1] = rest.col(1);
  psi.canonical_center = n - 1;
  return psi;
}

inline Eigen::VectorXcd mps_to_dense(const Mps& psi) {
  const int n = psi.n_sites();
  if (n > kMaxDenseStateBits)
    throw resource_limit_error("mps_to_dense: more than " +
                               std::to_string(kMaxDenseStateBits) + " bits");
  // Expand from the right edge; columns of m enumerate the already-expanded
  // lower-significance bits.
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = n - 1; j >= 0; --j) {
    const auto& s = psi.sites[j];
    Eigen::MatrixXcd next(s.left(), 2 * m.cols());
    next.leftCols(m.cols()) = s.a[0] * m;
    next.rightCols(m.cols()) = s.a[1] * m;
    m.swap(next);
  }
  return m.transpose().col(0);
}

inline cxd inner(const Mps& bra, const Mps& ket) {
  detail::require_same_sites(bra.n_sites(), ket.n_sites(), "inner");
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = 0; j < bra.n_sites(); ++j) {
    const auto& b = bra.sites[j];
    const auto& k = ket.sites[j];
    Eigen::MatrixXcd next = b.a[0].adjoint() * env * k.a[0];
    next.noalias() += b.a[1].adjoint() * env * k.a[1];
    env.swap(next);
  }
  return env(0, 0);
}

inline double norm(const Mps& psi) {
  return std::sqrt(std::max(0.0, std::real(inner(psi, psi))));
}

inline Mps& scale_in_place(Mps& psi, cxd factor) {
  for (auto& slice : psi.sites.front().a) slice *= factor;
  return psi;
}

inline Mps normalized(Mps psi) {
  double n = norm(psi);
  if (n == 0.0) throw std::invalid_argument("normalized: zero state");
  scale_in_place(psi, 1.0 / n);
  return psi;
}

inline Mps canonicalize(Mps psi, int center) {
  if (center < 0 || center >= psi.n_sites())
    throw std::invalid_argument("canonicalize: center out of range");
  for (int j = 0; j < center; ++j) detail::push_center_right(psi, j);
  for (int j = psi.n_sites() - 1; j > center; --j) detail::push_center_left(psi, j);
  psi.canonical_center = center;
  return psi;
}

// SVD-truncate every bond in canonical gauge. The reported weight is the sum
// of all discarded sigma^2, so the l2 error is bounded by sqrt(weight).
inline std::pair<Mps, double> truncate(const Mps& psi, const TruncationPolicy& policy) {
  Mps out = canonicalize(psi, 0);
  double weight = 0.0;
  for (int j = 0; j + 1 < out.n_sites(); ++j) {
    SvdSplit sp = svd_split(out.sites[j].merged_left(), policy);
    weight += sp.discarded_weight;
    out.sites[j] = MpsSite::from_merged_left(sp.u);
    Eigen::MatrixXcd carry = sp.sv.asDiagonal() * sp.vh;
    for (auto& slice : out.sites[j + 1].a) slice = (carry * slice).eval();
  }
  out.canonical_center = out.n_sites() - 1;
  return {std::move(out), weight};
}

// ca*a + cb*b by block embedding; bonds add, no implicit truncation.
inline Mps add(const Mps& a, const Mps& b, cxd ca = 1.0, cxd cb = 1.0) {
  detail::require_same_sites(a.n_sites(), b.n_sites(), "add");
  const int n = a.n_sites();
  Mps out;
  out.sites.resize(n);
  if (n == 1) {
    for (int i = 0; i < 2; ++i) out.sites[0].a[i] = ca * a.sites[0].a[i] + cb * b.sites[0].a[i];
    return out;
  }
  for (int i = 0; i < 2; ++i) {
    const auto& a0 = a.sites[0].a[i];
    const auto& b0 = b.sites[0].a[i];
    Eigen::MatrixXcd m(1, a0.cols() + b0.cols());
    m.leftCols(a0.cols()) = ca * a0;
    m.rightCols(b0.cols()) = cb * b0;
    out.sites[0].a[i] = m;
  }
  for (int j = 1; j < n - 1; ++j) {
    for (int i = 0; i < 2; ++i) {
      const auto& aj = a.sites[j].a[i];
      const auto& bj = b.sites[j].a[i];
      Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(aj.rows() + bj.rows(), aj.cols() + bj.cols());
      m.topLeftCorner(aj.rows(), aj.cols()) = aj;
      m.bottomRightCorner(bj.rows(), bj.cols()) = bj;
      out.sites[j].a[i] = m;
    }
  }
  for (int i = 0; i < 2; ++i) {
    const auto& an = a.sites[n - 1].a[i];
    const auto& bn = b.sites[n - 1].a[i];
    Eigen::MatrixXcd m(an.rows() + bn.rows(), 1);
    m.topRows(an.rows()) = an;
    m.bottomRows(bn.rows()) = bn;
    out.sites[n - 1].a[i] = m;
  }
  return out;
}

// Tensor product: a's bits become the more significant block.
inline Mps stack(const Mps& a, const Mps& b) {
  Mps out;
  out.sites = a.sites;
  out.sites.insert(out.sites.end(), b.sites.begin(), b.sites.end());
  out.canonical_center.reset();
  return out;
}

}  // namespace qtt
