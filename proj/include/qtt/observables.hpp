#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "qtt/grid.hpp"
#include "qtt/hermite.hpp"
#include "qtt/operators.hpp"

namespace qtt {

// One row of the trajectory output. Oracle trajectories set the bond and
// compression fields to -1 (no tensor-network representation).
struct TrajectoryRecord {
  long long step = 0;
  double tau = 0.0;
  double n_pump = 0.0;
  double n_signal = 0.0;
  double energy = 0.0;  // n_signal + 2 n_pump, in signal-photon units
  double var_x_signal = 0.0;
  long long max_bond = 0;
  long long param_count = 0;
  double inverse_compression = 0.0;
  double residual_raw = 0.0;
  double residual_normalized = 0.0;
  double norm_drift = 0.0;  // norm before renormalization minus one
};

struct QuadratureStats {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline double real_expectation(const Mps& psi, const Mpo& op, const char* what) {
  const cxd v = expectation(psi, op);
  if (std::abs(std::imag(v)) > 1e-8 * std::max(1.0, std::abs(v)))
    throw std::runtime_error(std::string(what) + ": unexpected imaginary part " +
                             std::to_string(std::imag(v)));
  return std::real(v);
}

}  // namespace detail

inline double photon_number(const Mps& psi, const ModeLayout& layout, Mode mode) {
  const Mpo n = embed_mpo(ladder_mpos(grid_of(layout, mode)).number, layout, mode);
  return detail::real_expectation(psi, n, "photon_number");
}

inline double total_energy(const Mps& psi, const ModeLayout& layout) {
  return photon_number(psi, layout, Mode::signal) + 2.0 * photon_number(psi, layout, Mode::pump);
}

inline QuadratureStats quadrature_stats(const Mps& psi, const ModeLayout& layout, Mode mode) {
  const Mpo x = embed_mpo(position_mpo(grid_of(layout, mode)), layout, mode);
  const Mpo x2 = mpo_truncate(mpo_mul(x, x), mpo_rounding());
  const double m = detail::real_expectation(psi, x, "quadrature mean");
  const double m2 = detail::real_expectation(psi, x2, "quadrature second moment");
  return {m, m2 - m * m};
}

// Reduced density matrix in the harmonic-oscillator (Fock) basis.
struct FockDensityMatrix {
  int cutoff = 0;
  Eigen::MatrixXcd rho;
  double captured_weight = 0.0;  // trace before any conditioning

  void check_invariants(double tol = 1e-8) const {
    if (rho.rows() != cutoff || rho.cols() != cutoff)
      throw std::invalid_argument("FockDensityMatrix: shape mismatch");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
      throw std::runtime_error("FockDensityMatrix: not Hermitian");
  }
};

namespace detail {

// phi_m(x_k) sqrt(dx) for m < cutoff, shape (N x cutoff).
inline Eigen::MatrixXd hermite_sample_matrix(const QuadratureGrid& grid, int cutoff) {
  Eigen::MatrixXd phi(grid.n_points(), cutoff);
  const double w = std::sqrt(grid.dx());
  for (Eigen::Index k = 0; k < grid.n_points(); ++k) {
    std::vector<double> row = hermite_functions_at(grid.point(k), cutoff - 1);
    for (int m = 0; m < cutoff; ++m) phi(k, m) = w * row[m];
  }
  return phi;
}

// Dense slices of one mode's block: (2^bits x boundary_bond), where the
// boundary bond joins the two modes. Never touches the other mode's sites.
inline Eigen::MatrixXcd mode_block_slices(const Mps& psi, const ModeLayout& layout, Mode mode) {
  const int np = layout.pump.n_bits;
  const int n = psi.n_sites();
  if (mode == Mode::pump) {
    // contract pump sites from the signal boundary leftward, keeping cols (bits, bond)
    const Eigen::Index rb = psi.sites[np - 1].right();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(rb, rb);
    for (int j = np - 1; j >= 0; --j) {
      Eigen::MatrixXcd next(psi.sites[j].left(), 2 * m.cols());
      next.leftCols(m.cols()) = psi.sites[j].a[0] * m;
      next.rightCols(m.cols()) = psi.sites[j].a[1] * m;
      m.swap(next);
    }
    // m is (1 x 2^np * rb) with column index x*rb + beta
    const Eigen::Index npts = Eigen::Index{1} << np;
    Eigen::MatrixXcd out(npts, rb);
    for (Eigen::Index x = 0; x < npts; ++x) out.row(x) = m.block(0, x * rb, 1, rb);
    return out;
  }
  // signal: expand signal sites from the right edge, rows keep the boundary
  // bond, columns enumerate signal bits MSB-first
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = n - 1; j >= np; --j) {
    Eigen::MatrixXcd next(psi.sites[j].left(), 2 * m.cols());
    next.leftCols(m.cols()) = psi.sites[j].a[0] * m;
    next.rightCols(m.cols()) = psi.sites[j].a[1] * m;
    m.swap(next);
  }
  // m is (rb x 2^ns); transpose to (2^ns x rb)
  return m.transpose();
}

// Gram matrix of the complementary block over the boundary bond.
inline Eigen::MatrixXcd complement_gram(const Mps& psi, const ModeLayout& layout, Mode mode) {
  const int np = layout.pump.n_bits;
  const int n = psi.n_sites();
  if (mode == Mode::pump) {
    // signal block from the right: G(beta, beta') = sum_x Psi_s(beta,x) conj(Psi_s(beta',x))
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Ones(1, 1);
    for (int j = n - 1; j >= np; --j) {
      Eigen::MatrixXcd next = psi.sites[j].a[0] * g * psi.sites[j].a[0].adjoint();
      next.noalias() += psi.sites[j].a[1] * g * psi.sites[j].a[1].adjoint();
      g.swap(next);
    }
    return g;
  }
  // pump block from the left: G(beta, beta') = sum_x conj(Psi_p(x,beta)) Psi_p(x,beta')
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Ones(1, 1);
  for (int j = 0; j < np; ++j) {
    Eigen::MatrixXcd next = psi.sites[j].a[0].adjoint() * g * psi.sites[j].a[0];
    next.noalias() += psi.sites[j].a[1].adjoint() * g * psi.sites[j].a[1];
    g.swap(next);
  }
  return g;
}

}  // namespace detail

// rho[m,k] = sum over the other mode of c_m c_k^*, with c_m the overlap of the
// chosen mode's block against the m-th oscillator eigenfunction. The two-mode
// state is never densified; only single-mode blocks are expanded.
inline FockDensityMatrix reduced_density_fock(const Mps& psi, const ModeLayout& layout, Mode mode,
                                              int cutoff) {
  if (cutoff < 1) throw std::invalid_argument("reduced_density_fock: cutoff must be >= 1");
  const QuadratureGrid& grid = grid_of(layout, mode);
  if (grid.dx() > 0.5 / std::sqrt(2.0 * (cutoff - 1) + 1.0))
    throw std::invalid_argument("reduced_density_fock: grid too coarse for requested cutoff");

  const Eigen::MatrixXd phi = detail::hermite_sample_matrix(grid, cutoff);
  const Eigen::MatrixXcd block = detail::mode_block_slices(psi, layout, mode);
  const Eigen::MatrixXcd gram = detail::complement_gram(psi, layout, mode);
  // c_m(bond) = sum_x phi_m(x)^* block(x, bond)
  const Eigen::MatrixXcd c = phi.transpose() * block;  // (cutoff x rb), phi real

  FockDensityMatrix out;
  out.cutoff = cutoff;
  if (mode == Mode::pump) {
    // rho(m,k) = sum c_m G c_k^*, signal traced out
    out.rho = c * gram * c.adjoint();
  } else {
    // pump traced out: rho(m,k) = c_m^T G^T c_k^* over the boundary bond
    out.rho = c * gram.transpose() * c.adjoint();
  }
  out.captured_weight = std::real(out.rho.trace());
  return out;
}

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. Eigenvalues are
// floored at zero before the square roots; values below a relative threshold
// are zeroed outright, since sqrt turns 1e-16 eigensolver noise into 1e-8
// contributions otherwise.
inline double fidelity(const FockDensityMatrix& rho, const FockDensityMatrix& sigma) {
  if (rho.cutoff != sigma.cutoff)
    throw std::invalid_argument("fidelity: cutoff mismatch");
  auto floored_sqrt_eigs = [](const Eigen::VectorXd& ev) {
    const double floor = 1e-12 * std::max(0.0, ev.maxCoeff());
    Eigen::VectorXd out = ev;
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = out(i) > floor ? std::sqrt(out(i)) : 0.0;
    return out;
  };
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.rho);
  Eigen::VectorXd sq = floored_sqrt_eigs(es.eigenvalues());
  Eigen::MatrixXcd sqrt_rho = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().adjoint();
  Eigen::MatrixXcd inner_m = sqrt_rho * sigma.rho * sqrt_rho;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es2(inner_m);
  const double t = floored_sqrt_eigs(es2.eigenvalues()).sum();
  return t * t;
}

struct CompressionMetrics {
  long long param_count = 0;
  double inverse_compression = 0.0;
  int max_bond = 0;
};

inline CompressionMetrics compression_metrics(const Mps& psi) {
  CompressionMetrics m;
  m.param_count = psi.param_count();
  m.inverse_compression = static_cast<double>(m.param_count) / std::exp2(psi.n_sites());
  m.max_bond = psi.max_bond();
  return m;
}

}  // namespace qtt
