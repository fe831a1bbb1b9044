#include "sphattn/sphere_harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sphattn {

void require_unit_rows(const Matrix& x, const char* name) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (!(std::abs(norm - 1.0) <= kUnitNormTol)) {
      std::ostringstream msg;
      msg << name << ": row " << i << " has norm " << norm << ", expected 1";
      throw InvalidArgument(msg.str());
    }
  }
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + (k + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void SphereConfig::validate() const {
  require(d >= 2, "SphereConfig: d must be >= 2");
  require(L >= 0, "SphereConfig: L must be >= 0");
}

namespace {

using u128 = unsigned __int128;
constexpr u128 kU64Max = std::numeric_limits<std::uint64_t>::max();

// C(n, r) with r reduced to min(r, n-r); each partial product is itself a
// binomial coefficient so the division is exact.
u128 binomial(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  u128 acc = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    const u128 next = acc * (n - r + i);
    if (next / (n - r + i) != acc || next / i > kU64Max)
      throw std::overflow_error("harmonic_dim: binomial overflows");
    acc = next / i;
  }
  return acc;
}

}  // namespace

std::uint64_t harmonic_dim(int d, int degree) {
  require(d >= 2, "harmonic_dim: d must be >= 2");
  require(degree >= 0, "harmonic_dim: degree must be >= 0");
  if (degree == 0) return 1;
  const auto k = static_cast<std::uint64_t>(degree);
  const auto dd = static_cast<std::uint64_t>(d);
  const u128 c = binomial(k + dd - 3, dd - 2);
  const u128 prefactor = 2 * k + dd - 2;
  if (c > 0 && prefactor > (std::numeric_limits<u128>::max() / c))
    throw std::overflow_error("harmonic_dim: result overflows");
  const u128 num = prefactor * c;
  const u128 result = num / k;
  if (result > kU64Max) throw std::overflow_error("harmonic_dim: result overflows");
  return static_cast<std::uint64_t>(result);
}

std::uint64_t cumulative_dim(int d, int degree) {
  require(degree >= 0, "cumulative_dim: degree must be >= 0");
  std::uint64_t total = 0;
  for (int l = 0; l <= degree; ++l) {
    const std::uint64_t n = harmonic_dim(d, l);
    if (total > std::numeric_limits<std::uint64_t>::max() - n)
      throw std::overflow_error("cumulative_dim: result overflows");
    total += n;
  }
  return total;
}

double clamp_dot(double t) {
  if (!(t >= -1.0 - kDotTol && t <= 1.0 + kDotTol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "argument " << t << " outside [-1, 1]";
    throw InvalidArgument(msg.str());
  }
  return std::clamp(t, -1.0, 1.0);
}

void gegenbauer_into(double t, int d, std::span<double> out) {
  const std::size_t count = out.size();
  if (count == 0) return;
  out[0] = 1.0;
  if (count == 1) return;
  out[1] = t;
  const double dm2 = d - 2.0;
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const double kk = static_cast<double>(k);
    out[k + 1] = ((2.0 * kk + dm2) * t * out[k] - kk * out[k - 1]) / (kk + dm2);
  }
}

GegenbauerRecurrence::GegenbauerRecurrence(int d, int L) : d_(d) {
  require(d >= 2, "GegenbauerRecurrence: d must be >= 2");
  require(L >= 0, "GegenbauerRecurrence: L must be >= 0");
  const double dm2 = d - 2.0;
  up_.resize(static_cast<std::size_t>(L));
  down_.resize(static_cast<std::size_t>(L));
  // slot 0 is unused: P_1 = t directly
  for (int k = 1; k < L; ++k) {
    up_[k] = (2.0 * k + dm2) / (k + dm2);
    down_[k] = k / (k + dm2);
  }
}

void GegenbauerRecurrence::eval(double t, std::span<double> out) const {
  out[0] = 1.0;
  if (up_.empty()) return;
  out[1] = t;
  for (std::size_t k = 1; k < up_.size(); ++k)
    out[k + 1] = up_[k] * t * out[k] - down_[k] * out[k - 1];
}

double GegenbauerRecurrence::weighted_sum(double t, std::span<const double> weights) const {
  const std::size_t count = weights.size();
  if (count == 0) return 0.0;
  double prev = 1.0;
  double acc = weights[0];
  if (count == 1) return acc;
  double cur = t;
  acc += weights[1] * t;
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const double next = up_[k] * t * cur - down_[k] * prev;
    prev = cur;
    cur = next;
    acc += weights[k + 1] * cur;
  }
  return acc;
}

std::vector<double> gegenbauer_all(double t, int d, int L) {
  require(d >= 2, "gegenbauer_all: d must be >= 2");
  require(L >= 0, "gegenbauer_all: L must be >= 0");
  std::vector<double> out(static_cast<std::size_t>(L) + 1);
  gegenbauer_into(clamp_dot(t), d, out);
  return out;
}

std::vector<Matrix> gegenbauer_matrix(const Matrix& dots, int d, int L) {
  require(d >= 2, "gegenbauer_matrix: d must be >= 2");
  require(L >= 0, "gegenbauer_matrix: L must be >= 0");
  std::vector<Matrix> out(static_cast<std::size_t>(L) + 1, Matrix(dots.rows(), dots.cols()));
  std::vector<double> p(static_cast<std::size_t>(L) + 1);
  for (Eigen::Index j = 0; j < dots.cols(); ++j) {
    for (Eigen::Index i = 0; i < dots.rows(); ++i) {
      double t = 0.0;
      try {
        t = clamp_dot(dots(i, j));
      } catch (const InvalidArgument& e) {
        std::ostringstream msg;
        msg << "gegenbauer_matrix: entry (" << i << ", " << j << "): " << e.what();
        throw InvalidArgument(msg.str());
      }
      gegenbauer_into(t, d, p);
      for (std::size_t l = 0; l < p.size(); ++l) out[l](i, j) = p[l];
    }
  }
  return out;
}

namespace {
constexpr std::size_t kSampleBlock = 4096;
}

Matrix sample_sphere(std::size_t count, int d, std::uint64_t seed) {
  require(count >= 1, "sample_sphere: count must be >= 1");
  require(d >= 2, "sample_sphere: d must be >= 2");
  Matrix out(static_cast<Eigen::Index>(count), d);
  // Each block of rows draws from its own derived stream.
  for (std::size_t start = 0; start < count; start += kSampleBlock) {
    std::mt19937_64 gen(split_seed(seed, start / kSampleBlock));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t stop = std::min(count, start + kSampleBlock);
    for (std::size_t i = start; i < stop; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      double norm = 0.0;
      do {
        for (int c = 0; c < d; ++c) out(row, c) = normal(gen);
        norm = out.row(row).norm();
      } while (norm == 0.0);
      out.row(row) /= norm;
    }
  }
  return out;
}

}  // namespace sphattn
