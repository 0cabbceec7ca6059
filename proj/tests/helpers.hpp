#pragma once

#include <Eigen/Dense>
#include <random>

#include "qtt/mpo.hpp"
#include "qtt/mps.hpp"

namespace qtt_test {

using qtt::cxd;

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> dist;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cxd(dist(gen), dist(gen));
  return v;
}

inline Eigen::MatrixXcd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> dist;
  Eigen::MatrixXcd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = cxd(dist(gen), dist(gen));
  return m;
}

// Random MPS with bonds capped at chi (and by the exact Schmidt limits).
inline qtt::Mps random_mps(int n_sites, int chi, std::mt19937_64& gen, bool normalize = true) {
  qtt::Mps psi;
  psi.sites.resize(n_sites);
  Eigen::Index left = 1;
  for (int j = 0; j < n_sites; ++j) {
    const Eigen::Index lmax = std::min<Eigen::Index>(Eigen::Index{1} << (j + 1),
                                                     Eigen::Index{1} << (n_sites - j - 1));
    const Eigen::Index right = (j == n_sites - 1) ? 1 : std::min<Eigen::Index>(chi, lmax);
    for (int i = 0; i < 2; ++i) psi.sites[j].a[i] = random_matrix(left, right, gen);
    left = right;
  }
  if (normalize) {
    const double n = qtt::norm(psi);
    qtt::scale_in_place(psi, 1.0 / n);
  }
  return psi;
}

inline qtt::Mpo random_mpo(int n_sites, int bond, std::mt19937_64& gen) {
  qtt::Mpo op;
  op.sites.resize(n_sites);
  Eigen::Index left = 1;
  for (int j = 0; j < n_sites; ++j) {
    const Eigen::Index right = (j == n_sites - 1) ? 1 : bond;
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) op.sites[j].w[i][k] = random_matrix(left, right, gen);
    left = right;
  }
  return op;
}

// Product state of the given single-site kets.
inline qtt::Mps product_state(const std::vector<Eigen::Vector2cd>& kets) {
  qtt::Mps psi;
  psi.sites.resize(kets.size());
  for (size_t j = 0; j < kets.size(); ++j) {
    psi.sites[j].a[0] = Eigen::MatrixXcd::Constant(1, 1, kets[j](0));
    psi.sites[j].a[1] = Eigen::MatrixXcd::Constant(1, 1, kets[j](1));
  }
  return psi;
}

}  // namespace qtt_test
