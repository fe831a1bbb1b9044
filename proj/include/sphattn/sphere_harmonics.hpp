#pragma once

// Dimension counts of spherical-harmonic spaces and the normalized
// Gegenbauer (Legendre-in-dimension-d) polynomials P_k^{(d)}, with P_k(1) = 1.

#include "sphattn/common.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sphattn {

struct SphereConfig {
  int d = 3;  // ambient dimension, points on S^{d-1}
  int L = 0;  // maximum channel degree

  void validate() const;
};

/// N(d, k): dimension of the degree-k harmonic space on S^{d-1}.
/// Exact; throws std::overflow_error when the result exceeds uint64.
std::uint64_t harmonic_dim(int d, int degree);

/// m_k = N(d,0) + ... + N(d,k).
std::uint64_t cumulative_dim(int d, int degree);

/// P_0(t), ..., P_L(t) in dimension d via the three-term recurrence
///   P_{k+1} = ((2k+d-2) t P_k - k P_{k-1}) / (k+d-2).
/// `t` may exceed [-1, 1] by kDotTol and is clamped.
std::vector<double> gegenbauer_all(double t, int d, int L);

/// Same as gegenbauer_all but writes into `out` (size L+1) without allocating;
/// `t` must already be clamped.
void gegenbauer_into(double t, int d, std::span<double> out);

/// Recurrence with the per-degree coefficients precomputed, for the hot
/// loops that evaluate millions of arguments with the same (d, L).
class GegenbauerRecurrence {
 public:
  GegenbauerRecurrence(int d, int L);

  int d() const { return d_; }
  int max_degree() const { return static_cast<int>(up_.size()); }

  /// Writes P_0(t)..P_L(t); `out` must hold at least L+1 values.
  void eval(double t, std::span<double> out) const;

  /// sum_l weights[l] * P_l(t) for l < weights.size() (which must be <= L+1).
  double weighted_sum(double t, std::span<const double> weights) const;

 private:
  int d_;
  // P_{k+1} = up_[k] * t * P_k - down_[k] * P_{k-1} for k = 1..L-1.
  std::vector<double> up_;
  std::vector<double> down_;
};

/// Clamps t into [-1, 1] when within kDotTol of the interval, else throws.
double clamp_dot(double t);

/// Entrywise P_l applied to a matrix of dot products; result[l](i, j) = P_l(G(i, j)).
std::vector<Matrix> gegenbauer_matrix(const Matrix& dots, int d, int L);

/// n points drawn uniformly on S^{d-1} (rows). Deterministic in (count, d, seed).
Matrix sample_sphere(std::size_t count, int d, std::uint64_t seed);

}  // namespace sphattn
