#pragma once

// Degree-ell0 spherical polynomial targets built from zonal terms
// c * P_l(<x, w>), and noisy labeled datasets drawn from them.

#include "sphattn/common.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sphattn {

struct ZonalTerm {
  int degree = 0;
  double coeff = 0.0;
  Vector direction;  // unit vector in R^d
};

/// f*(x) = sum over terms of coeff * P_degree(<x, direction>).
struct ZonalTarget {
  int d = 0;
  int ell0 = 0;
  std::vector<double> coeffs;   // per-degree coefficients as requested
  std::vector<ZonalTerm> terms;  // one per degree unless a multi-direction target was asked for
};

/// Draws one uniform direction per degree 0..ell0 (or `directions_per_degree`
/// directions, each weighted c_l / sqrt(k)). Rejects c_{ell0} == 0.
ZonalTarget make_target(int d, int ell0, const std::vector<double>& coeffs, std::uint64_t seed,
                        int directions_per_degree = 1);

Vector eval_target(const ZonalTarget& target, const Matrix& x);

/// RKHS norm of f* for the kernel with mu_l = 1/N(d, l). Equals sqrt(sum c_l^2)
/// for the single-direction construction.
double rkhs_norm(const ZonalTarget& target);

/// E_P[f*^2] = sum_l (1/N(d,l)) sum_{k,k'} c_k c_k' P_l(<w_k, w_k'>).
double l2_norm_sq(const ZonalTarget& target);

struct LabeledDataset {
  Matrix s;       // n x d, unit rows
  Vector f_star;  // clean labels f*(S)
  Vector y;       // f*(S) + noise
  double sigma0 = 0.0;

  Eigen::Index size() const { return s.rows(); }
};

/// S uniform on the sphere, y_i = f*(x_i) + N(0, sigma0^2). Throws
/// NumericalFailure if two feature rows coincide exactly.
LabeledDataset gen_dataset(const ZonalTarget& target, std::size_t n, double sigma0, std::uint64_t seed);

/// Pure-noise responses (f* = 0), used for control runs.
LabeledDataset gen_noise_dataset(int d, std::size_t n, double sigma0, std::uint64_t seed);

/// CSV with header x_0..x_{d-1},f_star,y.
void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset read_dataset_csv(const std::filesystem::path& path, double sigma0);

/// JSON sidecar: d, ell0, coeffs, directions, sigma0, seed.
void write_dataset_metadata(const std::filesystem::path& path, const ZonalTarget& target, double sigma0,
                            std::uint64_t seed);

}  // namespace sphattn
