#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "qtt/common.hpp"
#include "qtt/hermite.hpp"
#include "qtt/mps.hpp"

namespace qtt {

// Uniform quadrature grid with 2^n_bits points, x_k = x_min + k*dx,
// dx = (x_max - x_min)/(2^n - 1), so both endpoints are grid points.
struct QuadratureGrid {
  double x_min = 0.0;
  double x_max = 0.0;
  int n_bits = 0;

  void validate() const {
    if (!(x_max > x_min)) throw std::invalid_argument("QuadratureGrid: x_max must exceed x_min");
    if (n_bits < 1) throw std::invalid_argument("QuadratureGrid: n_bits must be >= 1");
  }
  Eigen::Index n_points() const { return Eigen::Index{1} << n_bits; }
  double dx() const { return (x_max - x_min) / static_cast<double>(n_points() - 1); }
  double point(Eigen::Index k) const { return x_min + static_cast<double>(k) * dx(); }
};

// Two-mode layout: pump bits first (more significant), then signal bits.
struct ModeLayout {
  QuadratureGrid pump;
  QuadratureGrid signal;

  int total_sites() const { return pump.n_bits + signal.n_bits; }
};

enum class Mode { pump, signal };

inline const QuadratureGrid& grid_of(const ModeLayout& layout, Mode m) {
  return m == Mode::pump ? layout.pump : layout.signal;
}

// Samples f on the grid with the sqrt(dx) quadrature weight folded in, so the
// l2 norm of the result approximates the L2 norm of f.
inline Eigen::VectorXcd sample_function(const QuadratureGrid& grid,
                                        const std::function<cxd(double)>& f) {
  grid.validate();
  if (grid.n_bits > kMaxDenseStateBits)
    throw resource_limit_error("sample_function: more than " +
                               std::to_string(kMaxDenseStateBits) + " bits");
  const double w = std::sqrt(grid.dx());
  Eigen::VectorXcd v(grid.n_points());
  for (Eigen::Index k = 0; k < grid.n_points(); ++k) v(k) = w * f(grid.point(k));
  return v;
}

// Diagnostics filled by the state encoders.
struct EncodeReport {
  double edge_amplitude = 0.0;  // max |psi| at the two boundary points, post-normalization
  bool support_ok = true;       // edge_amplitude <= 1e-8
};

namespace detail {

inline Mps encode_normalized(const Eigen::VectorXcd& samples, const TruncationPolicy& policy,
                             EncodeReport* report) {
  Eigen::VectorXcd v = samples;
  const double n = v.norm();
  if (n == 0.0) throw std::invalid_argument("encode: zero samples");
  v /= n;
  if (report) {
    report->edge_amplitude = std::max(std::abs(v(0)), std::abs(v(v.size() - 1)));
    report->support_ok = report->edge_amplitude <= 1e-8;
  }
  return normalized(mps_from_dense(v, policy));
}

}  // namespace detail

// Ground-state Gaussian pi^{-1/4} exp(-x^2/2), normalized on the grid.
inline Mps vacuum_state_mps(const QuadratureGrid& grid, const TruncationPolicy& policy,
                            EncodeReport* report = nullptr) {
  const double c = std::pow(M_PI, -0.25);
  return detail::encode_normalized(
      sample_function(grid, [c](double x) { return cxd(c * std::exp(-0.5 * x * x), 0.0); }),
      policy, report);
}

// Displaced Gaussian centered at x0 = alpha*sqrt(2). The grid must leave a
// 6-sigma margin (sigma = 1/sqrt(2)) around the center.
inline Mps coherent_state_mps(const QuadratureGrid& grid, double alpha,
                              const TruncationPolicy& policy, EncodeReport* report = nullptr) {
  grid.validate();
  const double x0 = alpha * std::sqrt(2.0);
  const double margin = 6.0 / std::sqrt(2.0);
  if (x0 - margin < grid.x_min || x0 + margin > grid.x_max)
    throw std::invalid_argument("coherent_state_mps: center x0 = " + std::to_string(x0) +
                                " too close to the grid boundary");
  const double c = std::pow(M_PI, -0.25);
  return detail::encode_normalized(
      sample_function(grid,
                      [c, x0](double x) { return cxd(c * std::exp(-0.5 * (x - x0) * (x - x0)), 0.0); }),
      policy, report);
}

// m-th harmonic oscillator eigenfunction. Requires dx <= 0.5/sqrt(2m+1) so the
// fastest oscillation is resolved.
inline Mps hermite_mode_mps(const QuadratureGrid& grid, int m, const TruncationPolicy& policy,
                            EncodeReport* report = nullptr) {
  grid.validate();
  if (m < 0) throw std::invalid_argument("hermite_mode_mps: m must be >= 0");
  if (grid.dx() > 0.5 / std::sqrt(2.0 * m + 1.0))
    throw std::invalid_argument("hermite_mode_mps: grid too coarse for m = " + std::to_string(m));
  return detail::encode_normalized(
      sample_function(grid, [m](double x) { return cxd(hermite_function(x, m), 0.0); }), policy,
      report);
}

// Coherent pump stacked on vacuum signal, pump bits first.
inline Mps initial_system_state(const ModeLayout& layout, double alpha,
                                const TruncationPolicy& policy) {
  Mps pump = coherent_state_mps(layout.pump, alpha, policy);
  Mps signal = vacuum_state_mps(layout.signal, policy);
  return normalized(stack(pump, signal));
}

}  // namespace qtt
