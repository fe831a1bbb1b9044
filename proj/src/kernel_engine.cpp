#include "sphattn/kernel_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sphattn {

AttentionWeights AttentionWeights::ones(int L) {
  require(L >= 0, "AttentionWeights: L must be >= 0");
  return {std::vector<double>(static_cast<std::size_t>(L) + 1, 1.0)};
}

AttentionWeights AttentionWeights::zeros(int L) {
  require(L >= 0, "AttentionWeights: L must be >= 0");
  return {std::vector<double>(static_cast<std::size_t>(L) + 1, 0.0)};
}

AttentionWeights AttentionWeights::finalized(int d, const std::vector<bool>& mask) {
  require(!mask.empty(), "AttentionWeights: empty mask");
  AttentionWeights w;
  w.tau.resize(mask.size(), 0.0);
  for (std::size_t l = 0; l < mask.size(); ++l) {
    if (mask[l]) w.tau[l] = std::sqrt(static_cast<double>(harmonic_dim(d, static_cast<int>(l))));
  }
  return w;
}

AttentionWeights AttentionWeights::oracle(int d, int ell_hat) {
  require(ell_hat >= 0, "AttentionWeights: ell_hat must be >= 0");
  return finalized(d, std::vector<bool>(static_cast<std::size_t>(ell_hat) + 1, true));
}

int AttentionWeights::highest_active() const {
  for (int l = max_degree(); l >= 0; --l)
    if (tau[static_cast<std::size_t>(l)] != 0.0) return l;
  return -1;
}

std::uint64_t AttentionWeights::rank(int d) const {
  std::uint64_t r = 0;
  for (std::size_t l = 0; l < tau.size(); ++l)
    if (tau[l] != 0.0) r += harmonic_dim(d, static_cast<int>(l));
  return r;
}

bool AttentionWeights::is_finalized(int d) const {
  for (std::size_t l = 0; l < tau.size(); ++l) {
    if (tau[l] == 0.0) continue;
    if (tau[l] != std::sqrt(static_cast<double>(harmonic_dim(d, static_cast<int>(l))))) return false;
  }
  return true;
}

FirstLayerDirections::FirstLayerDirections(Matrix q) : q_(std::move(q)) {
  require(q_.rows() >= 1, "FirstLayerDirections: width m must be >= 1");
  require(q_.cols() >= 2, "FirstLayerDirections: d must be >= 2");
  require_unit_rows(q_, "FirstLayerDirections");
}

FirstLayerDirections FirstLayerDirections::sample(std::size_t m, int d, std::uint64_t seed) {
  require(m >= 1, "FirstLayerDirections: width m must be >= 1");
  return FirstLayerDirections(sample_sphere(m, d, seed));
}

double activation(const Vector& x, const Vector& x_prime, const AttentionWeights& tau, int d) {
  require(x.size() == d && x_prime.size() == d, "activation: dimension mismatch");
  require(std::abs(x.norm() - 1.0) <= kUnitNormTol && std::abs(x_prime.norm() - 1.0) <= kUnitNormTol,
          "activation: inputs must be unit vectors");
  const GegenbauerRecurrence rec(d, tau.max_degree());
  return rec.weighted_sum(clamp_dot(x.dot(x_prime)), tau.tau);
}

void apply_activation(Matrix& dots, const AttentionWeights& tau, int d) {
  const GegenbauerRecurrence rec(d, tau.max_degree());
  double* data = dots.data();
  const Eigen::Index size = dots.size();
  for (Eigen::Index i = 0; i < size; ++i) data[i] = rec.weighted_sum(clamp_dot(data[i]), tau.tau);
}

Matrix activation_matrix(const Matrix& x, const Matrix& y, const AttentionWeights& tau) {
  require(x.cols() == y.cols(), "activation_matrix: dimension mismatch");
  Matrix out = x * y.transpose();
  apply_activation(out, tau, static_cast<int>(x.cols()));
  return out;
}

namespace {

bool same_points(const Matrix& a, const Matrix& b) {
  return &a == &b || (a.rows() == b.rows() && a.cols() == b.cols() && a == b);
}

void check_points(const Matrix& x, const Matrix& x_prime, const char* what) {
  require(x.cols() == x_prime.cols(), std::string(what) + ": dimension mismatch");
  require(x.cols() >= 2, std::string(what) + ": d must be >= 2");
  require_unit_rows(x, what);
  require_unit_rows(x_prime, what);
}

}  // namespace

Matrix population_gram(const Matrix& x, const Matrix& x_prime, int ell_hat) {
  require(ell_hat >= 0, "population_gram: ell_hat must be >= 0");
  check_points(x, x_prime, "population_gram");
  const int d = static_cast<int>(x.cols());
  const GegenbauerRecurrence rec(d, ell_hat);
  const std::vector<double> ones(static_cast<std::size_t>(ell_hat) + 1, 1.0);
  if (same_points(x, x_prime)) {
    const Eigen::Index n = x.rows();
    Matrix out(n, n);
    out.triangularView<Eigen::Lower>() = x * x.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        const double v = rec.weighted_sum(clamp_dot(out(i, j)), ones);
        out(i, j) = v;
        out(j, i) = v;
      }
    }
    return out;
  }
  Matrix out = x * x_prime.transpose();
  double* data = out.data();
  for (Eigen::Index i = 0; i < out.size(); ++i) data[i] = rec.weighted_sum(clamp_dot(data[i]), ones);
  return out;
}

Matrix empirical_gram(const Matrix& x, const Matrix& x_prime, const FirstLayerDirections& q,
                      const AttentionWeights& tau) {
  check_points(x, x_prime, "empirical_gram");
  require(q.dim() == x.cols(), "empirical_gram: first-layer dimension mismatch");
  const double inv_m = 1.0 / static_cast<double>(q.width());
  const Matrix a = activation_matrix(x, q.matrix(), tau);
  if (same_points(x, x_prime)) {
    Matrix out = Matrix::Zero(x.rows(), x.rows());
    out.selfadjointView<Eigen::Lower>().rankUpdate(a, inv_m);
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
  }
  const Matrix b = activation_matrix(x_prime, q.matrix(), tau);
  return (a * b.transpose()) * inv_m;
}

Matrix normalized_gram(const Matrix& k, std::size_t n) {
  require(n > 0, "normalized_gram: n must be > 0");
  require(k.rows() == k.cols(), "normalized_gram: matrix must be square");
  return k / static_cast<double>(n);
}

GramEigen gram_eigen(const Matrix& k_n) {
  require(k_n.rows() == k_n.cols(), "gram_spectrum: matrix must be square");
  require(k_n.allFinite(), "gram_spectrum: non-finite entries");
  const Matrix sym = 0.5 * (k_n + k_n.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalFailure("gram_spectrum: eigensolver failed");
  const Eigen::Index n = sym.rows();
  GramEigen out{Vector(n), Matrix(n, n)};
  // Eigen returns ascending order
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  const double floor = n > 0 ? -1e-8 * std::max(out.values(0), 0.0) : 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (out.values(i) < 0.0 && out.values(i) >= floor) out.values(i) = 0.0;
  return out;
}

Vector gram_spectrum(const Matrix& k_n) {
  require(k_n.rows() == k_n.cols(), "gram_spectrum: matrix must be square");
  require(k_n.allFinite(), "gram_spectrum: non-finite entries");
  const Matrix sym = 0.5 * (k_n + k_n.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalFailure("gram_spectrum: eigensolver failed");
  Vector values = solver.eigenvalues().reverse();
  const double floor = values.size() > 0 ? -1e-8 * std::max(values(0), 0.0) : 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i) < 0.0 && values(i) >= floor) values(i) = 0.0;
  return values;
}

}  // namespace sphattn
