#include "sphattn/complexity.hpp"

#include "sphattn/sphere_harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sphattn {

KernelSpectrum KernelSpectrum::empirical(const Vector& eigenvalues, std::size_t n) {
  require(eigenvalues.size() > 0, "KernelSpectrum: empty spectrum");
  require(n >= 1, "KernelSpectrum: n must be >= 1");
  require(eigenvalues.allFinite(), "KernelSpectrum: non-finite eigenvalue");
  KernelSpectrum out;
  out.eigenvalues = eigenvalues;
  std::sort(out.eigenvalues.data(), out.eigenvalues.data() + out.eigenvalues.size(), std::greater<>());
  const double floor = -1e-8 * std::max(out.eigenvalues(0), 0.0);
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    double& v = out.eigenvalues(i);
    require(v >= floor, "KernelSpectrum: eigenvalue below the PSD tolerance");
    v = std::max(v, 0.0);
  }
  out.n = n;
  out.source = SpectrumSource::kEmpirical;
  return out;
}

KernelSpectrum KernelSpectrum::population(int d, int ell_hat, std::size_t n) {
  require(ell_hat >= 0, "KernelSpectrum: ell_hat must be >= 0");
  require(n >= 1, "KernelSpectrum: n must be >= 1");
  const std::uint64_t rank = cumulative_dim(d, ell_hat);
  require(rank <= (1u << 26), "KernelSpectrum: population rank too large to list");
  const auto size = static_cast<Eigen::Index>(std::max<std::uint64_t>(rank, n));
  KernelSpectrum out;
  out.eigenvalues = Vector::Zero(size);
  Eigen::Index pos = 0;
  for (int l = 0; l <= ell_hat; ++l) {
    const std::uint64_t mult = harmonic_dim(d, l);
    out.eigenvalues.segment(pos, static_cast<Eigen::Index>(mult)).setConstant(1.0 / static_cast<double>(mult));
    pos += static_cast<Eigen::Index>(mult);
  }
  out.n = n;
  out.source = SpectrumSource::kPopulation;
  return out;
}

double empirical_complexity(const KernelSpectrum& spectrum, double eps) {
  require(spectrum.eigenvalues.size() > 0, "empirical_complexity: empty spectrum");
  require(spectrum.n >= 1, "empirical_complexity: n must be >= 1");
  require(eps > 0.0, "empirical_complexity: eps must be > 0");
  const double eps2 = eps * eps;
  double total = 0.0;
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) total += std::min(spectrum.eigenvalues(i), eps2);
  return std::sqrt(total / static_cast<double>(spectrum.n));
}

double population_complexity(int d, int ell_hat, std::size_t n, double eps) {
  require(ell_hat >= 0, "population_complexity: ell_hat must be >= 0");
  require(n >= 1, "population_complexity: n must be >= 1");
  require(eps > 0.0, "population_complexity: eps must be > 0");
  const double eps2 = eps * eps;
  double total = 0.0;
  for (int l = 0; l <= ell_hat; ++l) {
    const double mult = static_cast<double>(harmonic_dim(d, l));
    total += mult * std::min(1.0 / mult, eps2);
  }
  return std::sqrt(total / static_cast<double>(n));
}

double critical_radius(const std::function<double(double)>& complexity, double sigma0) {
  require(sigma0 > 0.0, "critical_radius: sigma0 must be > 0");
  const double r_large = complexity(1e6);
  require(std::isfinite(r_large) && r_large >= 0.0, "critical_radius: complexity must be finite and >= 0");
  if (r_large == 0.0) return 0.0;

  auto gap = [&](double eps) { return sigma0 * complexity(eps) - eps * eps; };
  double lo = 1e-8;
  double hi = std::sqrt(sigma0 * r_large) + 1.0;
  if (!(gap(lo) > 0.0 && gap(hi) < 0.0)) {
    std::ostringstream msg;
    msg << "critical_radius: no sign change of sigma0 R(eps) - eps^2 on [" << lo << ", " << hi << "]";
    throw NumericalFailure(msg.str());
  }
  // g > 0 on the left of the fixed point and < 0 on the right; run to ulp width.
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (gap(mid) > 0.0 ? lo : hi) = mid;
  }
  return std::abs(gap(lo)) <= std::abs(gap(hi)) ? lo : hi;
}

namespace {

constexpr std::size_t kRiskChunks = 64;

}  // namespace

RiskEstimate mc_risk(const BatchPredictor& predictor, const ZonalTarget& target, std::size_t num_samples,
                     std::uint64_t seed) {
  require(num_samples >= 2, "mc_risk: need at least 2 samples");
  const std::size_t chunks = std::min(kRiskChunks, num_samples);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = num_samples * c / chunks;
    const std::size_t end = num_samples * (c + 1) / chunks;
    const Matrix x = sample_sphere(end - begin, target.d, split_seed(seed, c));
    const Vector pred = predictor(x);
    require(pred.size() == x.rows(), "mc_risk: predictor returned the wrong number of values");
    const Vector err2 = (pred - eval_target(target, x)).array().square().matrix();
    sum += err2.sum();
    sum_sq += err2.squaredNorm();
  }
  const double count = static_cast<double>(num_samples);
  const double mean = sum / count;
  const double var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  return {mean, std::sqrt(var / count)};
}

RiskEstimate mc_risk(const PointPredictor& predictor, const ZonalTarget& target, std::size_t num_samples,
                     std::uint64_t seed) {
  return mc_risk(
      BatchPredictor([&](const Matrix& x) {
        Vector out(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predictor(x.row(i).transpose());
        return out;
      }),
      target, num_samples, seed);
}

double empirical_loss(const Vector& predictions, const Vector& f_star) {
  require(predictions.size() == f_star.size(), "empirical_loss: length mismatch");
  require(predictions.size() > 0, "empirical_loss: empty input");
  return (predictions - f_star).squaredNorm() / static_cast<double>(predictions.size());
}

}  // namespace sphattn
