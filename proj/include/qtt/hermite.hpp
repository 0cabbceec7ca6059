#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace qtt {

// Harmonic-oscillator eigenfunctions phi_m(x) = H_m(x) exp(-x^2/2) / sqrt(2^m m! sqrt(pi)),
// evaluated with the normalized three-term recurrence so no factorial overflows:
//   phi_{m+1} = sqrt(2/(m+1)) x phi_m - sqrt(m/(m+1)) phi_{m-1}
inline std::vector<double> hermite_functions_at(double x, int m_max) {
  std::vector<double> phi(m_max + 1);
  const double pi_quarter = std::pow(M_PI, -0.25);
  phi[0] = pi_quarter * std::exp(-0.5 * x * x);
  if (m_max == 0) return phi;
  phi[1] = std::sqrt(2.0) * x * phi[0];
  for (int m = 1; m < m_max; ++m)
    phi[m + 1] = std::sqrt(2.0 / (m + 1)) * x * phi[m] - std::sqrt(double(m) / (m + 1)) * phi[m - 1];
  return phi;
}

inline double hermite_function(double x, int m) { return hermite_functions_at(x, m)[m]; }

}  // namespace qtt
