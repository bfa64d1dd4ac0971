#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace qemc {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Basis-state index. Bit b addresses spin b (bit 0 -> +1, bit 1 -> -1).
using StateIndex = std::uint32_t;

inline constexpr int kMaxSpins = 12;

std::string_view code_version();

/// Raised when a numerical routine fails (eigensolver, SVD, factorization,
/// lost stochasticity). Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::size_t dimension_of(int n) { return std::size_t{1} << n; }

inline int spin_value(StateIndex index, int site) {
  return ((index >> site) & 1u) ? -1 : 1;
}

inline int hamming_distance(StateIndex a, StateIndex b) {
  return __builtin_popcount(a ^ b);
}

}  // namespace qemc
