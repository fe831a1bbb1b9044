#include "sphattn/target_synth.hpp"

#include "sphattn/sphere_harmonics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace sphattn {

ZonalTarget make_target(int d, int ell0, const std::vector<double>& coeffs, std::uint64_t seed,
                        int directions_per_degree) {
  require(d >= 2, "make_target: d must be >= 2");
  require(ell0 >= 0, "make_target: ell0 must be >= 0");
  require(coeffs.size() == static_cast<std::size_t>(ell0) + 1, "make_target: need ell0+1 coefficients");
  require(coeffs.back() != 0.0, "make_target: leading coefficient c_ell0 must be nonzero");
  require(directions_per_degree >= 1, "make_target: directions_per_degree must be >= 1");

  const auto per = static_cast<std::size_t>(directions_per_degree);
  const Matrix dirs = sample_sphere((static_cast<std::size_t>(ell0) + 1) * per, d, seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(per));

  ZonalTarget target{d, ell0, coeffs, {}};
  for (int l = 0; l <= ell0; ++l) {
    for (std::size_t k = 0; k < per; ++k) {
      const auto row = static_cast<Eigen::Index>(static_cast<std::size_t>(l) * per + k);
      target.terms.push_back({l, coeffs[static_cast<std::size_t>(l)] * scale, dirs.row(row).transpose()});
    }
  }
  return target;
}

Vector eval_target(const ZonalTarget& target, const Matrix& x) {
  require(x.cols() == target.d, "eval_target: dimension mismatch");
  require_unit_rows(x, "eval_target");
  const GegenbauerRecurrence rec(target.d, target.ell0);
  std::vector<double> p(static_cast<std::size_t>(target.ell0) + 1);
  Vector out = Vector::Zero(x.rows());
  for (const ZonalTerm& term : target.terms) {
    const Vector dots = x * term.direction;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      rec.eval(clamp_dot(dots(i)), p);
      out(i) += term.coeff * p[static_cast<std::size_t>(term.degree)];
    }
  }
  return out;
}

namespace {

// sum over same-degree term pairs of c c' P_l(<w, w'>), grouped by degree
std::vector<double> degree_energies(const ZonalTarget& target) {
  std::vector<double> energy(static_cast<std::size_t>(target.ell0) + 1, 0.0);
  const GegenbauerRecurrence rec(target.d, target.ell0);
  std::vector<double> p(static_cast<std::size_t>(target.ell0) + 1);
  for (const ZonalTerm& a : target.terms) {
    for (const ZonalTerm& b : target.terms) {
      if (a.degree != b.degree) continue;
      rec.eval(clamp_dot(a.direction.dot(b.direction)), p);
      energy[static_cast<std::size_t>(a.degree)] += a.coeff * b.coeff * p[static_cast<std::size_t>(a.degree)];
    }
  }
  return energy;
}

}  // namespace

double rkhs_norm(const ZonalTarget& target) {
  const std::vector<double> energy = degree_energies(target);
  return std::sqrt(std::max(0.0, std::accumulate(energy.begin(), energy.end(), 0.0)));
}

double l2_norm_sq(const ZonalTarget& target) {
  const std::vector<double> energy = degree_energies(target);
  double total = 0.0;
  for (std::size_t l = 0; l < energy.size(); ++l)
    total += energy[l] / static_cast<double>(harmonic_dim(target.d, static_cast<int>(l)));
  return total;
}

namespace {

void check_distinct_rows(const Matrix& s) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(s.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      if (s(a, c) != s(b, c)) return s(a, c) < s(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (s.row(order[i]) == s.row(order[i - 1]))
      throw NumericalFailure("gen_dataset: duplicate feature rows");
  }
}

constexpr std::size_t kNoiseBlock = 4096;

Vector gaussian_noise(std::size_t n, double sigma0, std::uint64_t seed) {
  Vector w(static_cast<Eigen::Index>(n));
  for (std::size_t start = 0; start < n; start += kNoiseBlock) {
    std::mt19937_64 gen(split_seed(seed, start / kNoiseBlock));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t stop = std::min(n, start + kNoiseBlock);
    for (std::size_t i = start; i < stop; ++i) w(static_cast<Eigen::Index>(i)) = sigma0 * normal(gen);
  }
  return w;
}

}  // namespace

LabeledDataset gen_dataset(const ZonalTarget& target, std::size_t n, double sigma0, std::uint64_t seed) {
  require(n >= 1, "gen_dataset: n must be >= 1");
  require(sigma0 >= 0.0, "gen_dataset: sigma0 must be >= 0");
  LabeledDataset data;
  data.s = sample_sphere(n, target.d, split_seed(seed, 0));
  check_distinct_rows(data.s);
  data.f_star = eval_target(target, data.s);
  data.y = data.f_star;
  if (sigma0 > 0.0) data.y += gaussian_noise(n, sigma0, split_seed(seed, 1));
  data.sigma0 = sigma0;
  return data;
}

LabeledDataset gen_noise_dataset(int d, std::size_t n, double sigma0, std::uint64_t seed) {
  require(n >= 1, "gen_noise_dataset: n must be >= 1");
  require(sigma0 >= 0.0, "gen_noise_dataset: sigma0 must be >= 0");
  LabeledDataset data;
  data.s = sample_sphere(n, d, split_seed(seed, 0));
  check_distinct_rows(data.s);
  data.f_star = Vector::Zero(static_cast<Eigen::Index>(n));
  data.y = sigma0 > 0.0 ? gaussian_noise(n, sigma0, split_seed(seed, 1)) : data.f_star;
  data.sigma0 = sigma0;
  return data;
}

void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.precision(17);
  for (Eigen::Index c = 0; c < data.s.cols(); ++c) out << "x_" << c << ',';
  out << "f_star,y\n";
  for (Eigen::Index i = 0; i < data.s.rows(); ++i) {
    for (Eigen::Index c = 0; c < data.s.cols(); ++c) out << data.s(i, c) << ',';
    out << data.f_star(i) << ',' << data.y(i) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path, double sigma0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  require(columns >= 4, "read_dataset_csv: need at least x_0, x_1, f_star, y");
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index count = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++count;
    }
    require(count == columns, "read_dataset_csv: ragged row in " + path.string());
    ++rows;
  }
  const Eigen::Index d = columns - 2;
  LabeledDataset data;
  data.s.resize(rows, d);
  data.f_star.resize(rows);
  data.y.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double* row = values.data() + i * columns;
    for (Eigen::Index c = 0; c < d; ++c) data.s(i, c) = row[c];
    data.f_star(i) = row[d];
    data.y(i) = row[d + 1];
  }
  data.sigma0 = sigma0;
  return data;
}

void write_dataset_metadata(const std::filesystem::path& path, const ZonalTarget& target, double sigma0,
                            std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["d"] = target.d;
  j["ell0"] = target.ell0;
  j["coeffs"] = target.coeffs;
  auto dirs = nlohmann::ordered_json::array();
  for (const ZonalTerm& term : target.terms) {
    dirs.push_back({{"degree", term.degree},
                    {"coeff", term.coeff},
                    {"direction", std::vector<double>(term.direction.data(),
                                                      term.direction.data() + term.direction.size())}});
  }
  j["directions"] = dirs;
  j["sigma0"] = sigma0;
  j["seed"] = seed;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace sphattn
