#pragma once

// Stage two: full-batch gradient descent on the second-layer weights with the
// finalized activation frozen,
//   a(t+1) = a(t) - (eta/n) Z (y_hat(t) - y),   Z(r, i) = sigma_tau(x_i, q_r) / sqrt(m),
// from a(0) = 0. Because Z is frozen the residual obeys the linear recursion
// u(t+1) = (I - eta K_hat_n) u(t), which closed_form_residual evaluates directly.

#include "sphattn/common.hpp"
#include "sphattn/kernel_engine.hpp"
#include "sphattn/target_synth.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace sphattn {

/// Dense m x n feature matrix Z.
Matrix feature_matrix(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau);

/// f(a, x) = (1/sqrt(m)) sum_r a_r sigma_tau(x, q_r) for each row of x.
Vector predict(const Vector& a, const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau);

/// Z = lift * reduced. For the dense form `lift` is absent and `reduced` is Z.
/// The compressed form keeps an orthonormal basis of range(Z) (m x k) and the
/// k x n coordinates, which is exact up to rounding because Z has rank
/// sum_{l active} N(d, l).
struct FeatureFactor {
  Matrix reduced;
  std::optional<Matrix> lift;
  Eigen::Index width = 0;  // m

  bool dense() const { return !lift.has_value(); }
  Eigen::Index samples() const { return reduced.cols(); }
};

enum class FeatureBackend { kAuto, kDense, kCompressed };

FeatureFactor dense_features(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau);

/// Two streamed passes over row blocks of Z (range sketch, then projection);
/// never materializes Z. Throws NumericalFailure if the sketch misses more
/// than 1e-10 of Z's energy.
FeatureFactor compressed_features(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau,
                                  std::uint64_t sketch_seed);

struct TrainerState {
  Vector coords;  // a itself for dense features, coordinates in the lift basis otherwise
  Vector y_hat;   // network output on the training set
  std::size_t t = 0;
  double eta = 0.0;
  std::shared_ptr<const FeatureFactor> features;

  /// Second-layer weights a(t) (length m).
  Vector weights() const;
};

TrainerState initial_state(std::shared_ptr<const FeatureFactor> features, double eta);

/// One exact step of gradient descent on (1/2n) ||y_hat - y||^2.
TrainerState gd_step(const TrainerState& state, const Vector& y);

struct TrainingTrace {
  std::vector<double> loss;           // (1/2n) ||y_hat(t) - y||^2, t = 0..T
  std::vector<double> residual_norm;  // ||y_hat(t) - y||
  std::vector<double> clean_loss;     // (1/n) ||y_hat(t) - f*(S)||^2
  std::vector<Vector> snapshots;      // a(t) at each t in snapshot_steps
  std::vector<std::size_t> snapshot_steps;
};

struct TrainOptions {
  double eta = 0.5;
  std::size_t steps = 1;
  FeatureBackend backend = FeatureBackend::kAuto;
  bool keep_snapshots = false;          // every step
  std::vector<std::size_t> checkpoints;  // extra steps whose a(t) is kept
  std::uint64_t sketch_seed = 0;
};

struct TrainResult {
  TrainerState state;
  TrainingTrace trace;
};

/// Runs `steps` GD steps from a(0) = 0. Aborts with NumericalFailure on a
/// non-finite residual or when the residual norm grows tenfold over 5 steps.
TrainResult train(const LabeledDataset& data, const FirstLayerDirections& q, const AttentionWeights& tau_final,
                  const TrainOptions& options);

/// Writes the trace as CSV with columns t,loss,residual_norm.
void write_trace_csv(const std::string& path, const TrainingTrace& trace);

/// -(I - eta K)^t y: repeated multiplication for t <= 10^4, spectral otherwise.
Vector closed_form_residual(const Matrix& k_hat_n, const Vector& y, double eta, std::size_t t);
Vector closed_form_residual_power(const Matrix& k_hat_n, const Vector& y, double eta, std::size_t t);
Vector closed_form_residual_spectral(const Matrix& k_hat_n, const Vector& y, double eta, std::size_t t);

}  // namespace sphattn
