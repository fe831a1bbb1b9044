#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sphattn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an input violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite or divergent values.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

// Tolerance used when checking that caller-supplied points lie on the sphere.
inline constexpr double kUnitNormTol = 1e-9;

// Band outside [-1, 1] tolerated (and clamped) for polynomial arguments.
inline constexpr double kDotTol = 1e-12;

/// Throws unless every row of `x` has unit Euclidean norm.
void require_unit_rows(const Matrix& x, const char* name);

/// Counter-based seed derivation: split(seed, k) is a splitmix64 finalizer
/// applied to seed + (k + 1) * 0x9E3779B97F4A7C15.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t k);

}  // namespace sphattn
