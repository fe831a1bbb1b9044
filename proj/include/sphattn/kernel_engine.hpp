#pragma once

// Channel-attention activation sigma_tau(x, x') = sum_l tau_l P_l(<x, x'>),
// the population kernel K, the width-m empirical kernel K_hat and their
// gram matrices. All kernels are assembled from dot products through the
// addition theorem; no explicit harmonic basis is ever formed.

#include "sphattn/common.hpp"
#include "sphattn/sphere_harmonics.hpp"

#include <cstdint>
#include <vector>

namespace sphattn {

/// Per-degree channel weights tau_0..tau_L.
struct AttentionWeights {
  std::vector<double> tau;

  static AttentionWeights ones(int L);
  static AttentionWeights zeros(int L);
  /// tau_l = sqrt(N(d, l)) where mask[l], else 0.
  static AttentionWeights finalized(int d, const std::vector<bool>& mask);
  /// Finalized weights selecting degrees 0..ell_hat (the "oracle" channels).
  static AttentionWeights oracle(int d, int ell_hat);

  int max_degree() const { return static_cast<int>(tau.size()) - 1; }
  /// Highest degree with a nonzero weight, or -1 when all are zero.
  int highest_active() const;
  /// Sum of N(d, l) over active degrees: the rank of the induced kernel.
  std::uint64_t rank(int d) const;
  bool is_finalized(int d) const;
};

/// Random first-layer directions q_1..q_m (rows), fixed during training.
class FirstLayerDirections {
 public:
  explicit FirstLayerDirections(Matrix q);
  static FirstLayerDirections sample(std::size_t m, int d, std::uint64_t seed);

  const Matrix& matrix() const { return q_; }
  Eigen::Index width() const { return q_.rows(); }
  int dim() const { return static_cast<int>(q_.cols()); }

 private:
  Matrix q_;
};

double activation(const Vector& x, const Vector& x_prime, const AttentionWeights& tau, int d);

/// result(i, j) = sigma_tau(X_i, Y_j). Inputs are trusted to be unit rows.
Matrix activation_matrix(const Matrix& x, const Matrix& y, const AttentionWeights& tau);

/// Maps a block of dot products to activations in place.
void apply_activation(Matrix& dots, const AttentionWeights& tau, int d);

/// K(x, x') = sum_{l <= ell_hat} P_l(<x, x'>).
Matrix population_gram(const Matrix& x, const Matrix& x_prime, int ell_hat);

/// K_hat(x, x') = (1/m) sum_r sigma(x, q_r) sigma(q_r, x').
/// When x and x_prime are equal the result is assembled symmetrically.
Matrix empirical_gram(const Matrix& x, const Matrix& x_prime, const FirstLayerDirections& q,
                      const AttentionWeights& tau);

Matrix normalized_gram(const Matrix& k, std::size_t n);

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
struct GramEigen {
  Vector values;
  Matrix vectors;  // columns match `values`
};

/// Symmetrizes, decomposes, sorts descending and clamps tiny negatives
/// (above -1e-8 * lambda_max) to zero. Throws on non-finite input.
GramEigen gram_eigen(const Matrix& k_n);
Vector gram_spectrum(const Matrix& k_n);

}  // namespace sphattn
