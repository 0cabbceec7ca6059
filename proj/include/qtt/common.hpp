#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace qtt {

using cxd = std::complex<double>;

inline constexpr int kMaxDenseStateBits = 26;  // ~1 GiB guard for dense state vectors
inline constexpr int kMaxDenseOperatorBits = 13;  // ~1 GiB guard for dense operators

// Thrown when a dense bridge would exceed the memory guards above.
class resource_limit_error : public std::runtime_error {
 public:
  explicit resource_limit_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a local linear system is numerically singular.
class solver_breakdown_error : public std::runtime_error {
 public:
  explicit solver_breakdown_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qtt
