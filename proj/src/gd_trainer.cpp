#include "sphattn/gd_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace sphattn {

namespace {

constexpr Eigen::Index kBlockRows = 256;
constexpr Eigen::Index kOversample = 10;
constexpr std::size_t kPowerLimit = 10000;

void check_features_inputs(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau) {
  require(x.rows() >= 1, "features: need at least one sample");
  require(x.cols() == q.dim(), "features: dimension mismatch between samples and first layer");
  require(!tau.tau.empty(), "features: empty attention weights");
  require_unit_rows(x, "features");
}

// Row block [start, start+rows) of Z.
Matrix feature_block(const Matrix& xt, const Matrix& qm, Eigen::Index start, Eigen::Index rows,
                     const AttentionWeights& tau, double inv_sqrt_m) {
  Matrix block = qm.middleRows(start, rows) * xt;
  apply_activation(block, tau, static_cast<int>(qm.cols()));
  block *= inv_sqrt_m;
  return block;
}

}  // namespace

Matrix feature_matrix(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau) {
  check_features_inputs(x, q, tau);
  Matrix z = q.matrix() * x.transpose();
  apply_activation(z, tau, q.dim());
  return z / std::sqrt(static_cast<double>(q.width()));
}

Vector predict(const Vector& a, const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau) {
  require(a.size() == q.width(), "predict: weight length must equal the width m");
  check_features_inputs(x, q, tau);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(q.width()));
  const Matrix qt = q.matrix().transpose();
  Vector out(x.rows());
  for (Eigen::Index start = 0; start < x.rows(); start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, x.rows() - start);
    Matrix block = x.middleRows(start, rows) * qt;
    apply_activation(block, tau, q.dim());
    out.segment(start, rows) = (block * a) * inv_sqrt_m;
  }
  return out;
}

FeatureFactor dense_features(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau) {
  return FeatureFactor{feature_matrix(x, q, tau), std::nullopt, q.width()};
}

FeatureFactor compressed_features(const Matrix& x, const FirstLayerDirections& q, const AttentionWeights& tau,
                                  std::uint64_t sketch_seed) {
  check_features_inputs(x, q, tau);
  const int d = q.dim();
  const Eigen::Index m = q.width();
  const Eigen::Index n = x.rows();
  const auto rank = static_cast<Eigen::Index>(tau.rank(d));
  if (rank == 0) return FeatureFactor{Matrix(0, n), Matrix(m, 0), m};

  const Eigen::Index k = std::min({rank + kOversample, m, n});
  Matrix omega(n, k);
  {
    std::mt19937_64 gen(sketch_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < n; ++i) omega(i, j) = normal(gen);
  }

  const Matrix xt = x.transpose();
  const Matrix& qm = q.matrix();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));

  Matrix sketch(m, k);
  for (Eigen::Index start = 0; start < m; start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, m - start);
    sketch.middleRows(start, rows) = feature_block(xt, qm, start, rows, tau, inv_sqrt_m) * omega;
  }
  const Eigen::HouseholderQR<Matrix> qr(sketch);
  const Matrix basis = qr.householderQ() * Matrix::Identity(m, k);

  Matrix coords = Matrix::Zero(k, n);
  double total_energy = 0.0;
  for (Eigen::Index start = 0; start < m; start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, m - start);
    const Matrix block = feature_block(xt, qm, start, rows, tau, inv_sqrt_m);
    total_energy += block.squaredNorm();
    coords.noalias() += basis.middleRows(start, rows).transpose() * block;
  }
  const double captured = coords.squaredNorm();
  if (total_energy > 0.0 && (total_energy - captured) > 1e-10 * total_energy) {
    std::ostringstream msg;
    msg << "compressed_features: sketch of rank " << k << " captures only " << captured / total_energy
        << " of the feature energy";
    throw NumericalFailure(msg.str());
  }

  // Drop the oversampled directions that only carry rounding noise.
  const Eigen::JacobiSVD<Matrix> svd(coords.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Eigen::Index keep = 0;
  while (keep < sv.size() && sv(keep) > 1e-12 * sv(0)) ++keep;
  FeatureFactor out;
  out.width = m;
  out.lift = basis * svd.matrixV().leftCols(keep);
  out.reduced = sv.head(keep).asDiagonal() * svd.matrixU().leftCols(keep).transpose();
  return out;
}

Vector TrainerState::weights() const {
  if (features->dense()) return coords;
  return *features->lift * coords;
}

TrainerState initial_state(std::shared_ptr<const FeatureFactor> features, double eta) {
  require(features != nullptr, "initial_state: missing features");
  require(eta > 0.0, "initial_state: eta must be > 0");
  TrainerState state;
  state.coords = Vector::Zero(features->reduced.rows());
  state.y_hat = Vector::Zero(features->samples());
  state.eta = eta;
  state.features = std::move(features);
  return state;
}

TrainerState gd_step(const TrainerState& state, const Vector& y) {
  require(state.eta > 0.0, "gd_step: eta must be > 0");
  require(y.size() == state.y_hat.size(), "gd_step: y length must equal n");
  const Vector residual = state.y_hat - y;
  if (!residual.allFinite()) {
    std::ostringstream msg;
    msg << "gd_step: non-finite residual at step " << state.t << " (eta = " << state.eta
        << "; eta * lambda_max(K_hat_n) is likely >= 2)";
    throw NumericalFailure(msg.str());
  }
  const Matrix& z = state.features->reduced;
  const double n = static_cast<double>(y.size());
  TrainerState next;
  next.coords = state.coords - (state.eta / n) * (z * residual);
  next.y_hat = z.transpose() * next.coords;
  next.t = state.t + 1;
  next.eta = state.eta;
  next.features = state.features;
  return next;
}

TrainResult train(const LabeledDataset& data, const FirstLayerDirections& q, const AttentionWeights& tau_final,
                  const TrainOptions& options) {
  require(options.steps >= 1, "train: T must be >= 1");
  require(options.eta > 0.0, "train: eta must be > 0");
  require(data.y.size() == data.s.rows(), "train: y length must equal n");

  FeatureBackend backend = options.backend;
  if (backend == FeatureBackend::kAuto) {
    const auto rank = static_cast<double>(tau_final.rank(q.dim()));
    const double m = static_cast<double>(q.width());
    const double n = static_cast<double>(data.s.rows());
    const bool small = m * n <= 4.0e6;
    const bool low_rank = rank + kOversample < 0.5 * std::min(m, n);
    backend = (small || !low_rank) ? FeatureBackend::kDense : FeatureBackend::kCompressed;
  }
  auto features = std::make_shared<const FeatureFactor>(
      backend == FeatureBackend::kDense ? dense_features(data.s, q, tau_final)
                                        : compressed_features(data.s, q, tau_final, options.sketch_seed));

  const double n = static_cast<double>(data.s.rows());
  const bool have_clean = data.f_star.size() == data.y.size();
  TrainResult result{initial_state(features, options.eta), {}};
  TrainingTrace& trace = result.trace;
  auto record = [&](const TrainerState& s) {
    const double rn = (s.y_hat - data.y).norm();
    trace.residual_norm.push_back(rn);
    trace.loss.push_back(rn * rn / (2.0 * n));
    if (have_clean) trace.clean_loss.push_back((s.y_hat - data.f_star).squaredNorm() / n);
    if (options.keep_snapshots ||
        std::find(options.checkpoints.begin(), options.checkpoints.end(), s.t) != options.checkpoints.end()) {
      trace.snapshots.push_back(s.weights());
      trace.snapshot_steps.push_back(s.t);
    }
  };
  record(result.state);
  for (std::size_t t = 0; t < options.steps; ++t) {
    result.state = gd_step(result.state, data.y);
    record(result.state);
    const std::size_t now = result.state.t;
    const double rn = trace.residual_norm.back();
    if (!std::isfinite(rn) || (now >= 5 && rn > 10.0 * trace.residual_norm[now - 5])) {
      std::ostringstream msg;
      msg << "train: diverged at step " << now << " (residual norm " << rn << ", eta = " << options.eta << ")";
      throw NumericalFailure(msg.str());
    }
  }
  return result;
}

void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  out << "t,loss,residual_norm\n";
  for (std::size_t t = 0; t < trace.loss.size(); ++t)
    out << t << ',' << trace.loss[t] << ',' << trace.residual_norm[t] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

void check_residual_inputs(const Matrix& k, const Vector& y) {
  require(k.rows() == k.cols(), "closed_form_residual: K must be square");
  require(k.rows() == y.size(), "closed_form_residual: size mismatch");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  require((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
          "closed_form_residual: K must be symmetric");
}

}  // namespace

Vector closed_form_residual_power(const Matrix& k_hat_n, const Vector& y, double eta, std::size_t t) {
  check_residual_inputs(k_hat_n, y);
  Vector u = -y;
  for (std::size_t s = 0; s < t; ++s) u -= eta * (k_hat_n * u);
  return u;
}

Vector closed_form_residual_spectral(const Matrix& k_hat_n, const Vector& y, double eta, std::size_t t) {
  check_residual_inputs(k_hat_n, y);
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (k_hat_n + k_hat_n.transpose()));
  if (solver.info() != Eigen::Success) throw NumericalFailure("closed_form_residual: eigensolver failed");
  const Matrix& u = solver.eigenvectors();
  Vector coeff = u.transpose() * (-y);
  for (Eigen::Index i = 0; i < coeff.size(); ++i)
    coeff(i) *= std::pow(1.0 - eta * solver.eigenvalues()(i), static_cast<double>(t));
  return u * coeff;
}

Vector closed_form_residual(const Matrix& k_hat_n, const Vector& y, double eta, std::size_t t) {
  if (t <= kPowerLimit) return closed_form_residual_power(k_hat_n, y, eta, t);
  return closed_form_residual_spectral(k_hat_n, y, eta, t);
}

}  // namespace sphattn
