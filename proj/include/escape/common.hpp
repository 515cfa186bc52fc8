#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace escape {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every random stream in the library is a 64-bit Mersenne twister. Runs are
/// reproducible per (seed, platform standard library).
using Rng = std::mt19937_64;

/// Raised when an argument violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an oracle returns a non-finite value during a run.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

/// ceil() that ignores floating-point residue on values that are integers up to
/// rounding, e.g. 128 / (0.01 * 0.01) = 1279999.9999999998.
inline double snapped_ceil(double q) {
  const double nearest = std::round(q);
  if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, std::abs(q))) return nearest;
  return std::ceil(q);
}

/// Derives an independent 64-bit seed from a base seed and a stream index.
/// Used to give each worker / call its own stream without sharing state.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace escape
