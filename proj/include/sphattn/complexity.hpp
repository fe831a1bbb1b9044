#pragma once

// Kernel complexities R(eps) = sqrt((1/n) sum_i min(lambda_i, eps^2)), the
// critical radius solving sigma0 R(eps) = eps^2, Monte Carlo population risk
// and the empirical loss against clean labels.

#include "sphattn/common.hpp"
#include "sphattn/target_synth.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace sphattn {

enum class SpectrumSource { kEmpirical, kPopulation };

struct KernelSpectrum {
  Vector eigenvalues;  // non-increasing, >= 0
  std::size_t n = 0;
  SpectrumSource source = SpectrumSource::kEmpirical;

  /// Sorts and clamps; throws on negative values below -1e-8 * lambda_max.
  static KernelSpectrum empirical(const Vector& eigenvalues, std::size_t n);
  /// 1/N(d, l) repeated N(d, l) times for l <= ell_hat, zero-padded to n
  /// entries when n exceeds m_{ell_hat}.
  static KernelSpectrum population(int d, int ell_hat, std::size_t n);
};

double empirical_complexity(const KernelSpectrum& spectrum, double eps);

/// Closed form over degrees; never expands the multiplicities.
double population_complexity(int d, int ell_hat, std::size_t n, double eps);

/// Bisection on sign(sigma0 R(eps) - eps^2) over [1e-8, sqrt(sigma0 R(1e6)) + 1].
/// Returns 0 when R vanishes identically on the bracket.
double critical_radius(const std::function<double(double)>& complexity, double sigma0);

struct RiskEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

using PointPredictor = std::function<double(const Vector&)>;
/// Maps a block of unit rows to predictions, one per row.
using BatchPredictor = std::function<Vector(const Matrix&)>;

/// E_P[(f - f*)^2] over fresh uniform points. The sample is split into a fixed
/// number of chunks with seeds split(seed, chunk), so the value does not
/// depend on how chunks are scheduled.
RiskEstimate mc_risk(const BatchPredictor& predictor, const ZonalTarget& target, std::size_t num_samples,
                     std::uint64_t seed);
RiskEstimate mc_risk(const PointPredictor& predictor, const ZonalTarget& target, std::size_t num_samples,
                     std::uint64_t seed);

/// (1/n) ||predictions - f*(S)||^2.
double empirical_loss(const Vector& predictions, const Vector& f_star);

}  // namespace sphattn
