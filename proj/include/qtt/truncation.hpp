#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "qtt/common.hpp"

namespace qtt {

// Bond truncation rule shared by all SVD-based compressions: keep at most
// chi_max singular values, and drop those below sv_cutoff * sigma_max.
struct TruncationPolicy {
  int chi_max = std::numeric_limits<int>::max();
  double sv_cutoff = 0.0;

  static TruncationPolicy lossless() { return {std::numeric_limits<int>::max(), 0.0}; }
  static TruncationPolicy bond_cap(int chi, double cutoff = 0.0) { return {chi, cutoff}; }

  void validate() const {
    if (chi_max < 1) throw std::invalid_argument("TruncationPolicy: chi_max must be >= 1");
    if (sv_cutoff < 0.0 || sv_cutoff >= 1.0)
      throw std::invalid_argument("TruncationPolicy: sv_cutoff must be in [0, 1)");
  }
};

// Result of one truncated SVD split m = u * diag(sv) * vh + error.
struct SvdSplit {
  Eigen::MatrixXcd u;          // left factor, orthonormal columns
  Eigen::VectorXd sv;          // kept singular values, descending
  Eigen::MatrixXcd vh;         // right factor, orthonormal rows
  double discarded_weight = 0.0;  // sum of discarded sigma^2
};

// Deterministic truncated SVD. The sign gauge makes the largest-magnitude
// entry of each left singular vector real positive, so repeated runs produce
// bit-identical factors; equal singular values keep their (lower) index order.
inline SvdSplit svd_split(const Eigen::MatrixXcd& m, const TruncationPolicy& policy) {
  policy.validate();
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const Eigen::Index full = s.size();

  // Numerical-rank floor: directions below ~16 eps relative carry no
  // information and would only inflate bonds.
  constexpr double kRankFloor = 16.0 * std::numeric_limits<double>::epsilon();
  const double threshold =
      full > 0 ? std::max(policy.sv_cutoff, kRankFloor) * s(0) : 0.0;
  Eigen::Index keep = 0;
  for (Eigen::Index k = 0; k < full; ++k) {
    if (keep >= policy.chi_max) break;
    if (k > 0 && s(k) < threshold) break;
    ++keep;
  }
  if (keep == 0) keep = 1;  // never return an empty bond

  SvdSplit out;
  out.u = svd.matrixU().leftCols(keep);
  out.sv = s.head(keep);
  out.vh = svd.matrixV().leftCols(keep).adjoint();
  out.discarded_weight = 0.0;
  for (Eigen::Index k = keep; k < full; ++k) out.discarded_weight += s(k) * s(k);

  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::Index imax = 0;
    double amax = -1.0;
    for (Eigen::Index r = 0; r < out.u.rows(); ++r) {
      double a = std::abs(out.u(r, c));
      if (a > amax) {
        amax = a;
        imax = r;
      }
    }
    if (amax > 0.0) {
      cxd phase = out.u(imax, c) / amax;
      out.u.col(c) *= std::conj(phase);
      out.vh.row(c) *= phase;
    }
  }
  return out;
}

}  // namespace qtt
