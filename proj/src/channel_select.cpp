#include "sphattn/channel_select.hpp"

#include "sphattn/sphere_harmonics.hpp"

#include <json.hpp>

#include <cmath>

namespace sphattn {

namespace {

constexpr Eigen::Index kBlockRows = 256;

void check_inputs(const LabeledDataset& data, const FirstLayerDirections& q, int L) {
  require(L >= 0, "stage one: L must be >= 0");
  require(data.s.rows() >= 1, "stage one: n must be >= 1");
  require(data.y.size() == data.s.rows(), "stage one: y length must equal n");
  require(data.s.cols() == q.dim(), "stage one: feature and first-layer dimensions differ");
  require_unit_rows(data.s, "stage one");
}

std::vector<double> dims(int d, int L) {
  std::vector<double> out(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l) out[static_cast<std::size_t>(l)] = static_cast<double>(harmonic_dim(d, l));
  return out;
}

Vector a_from_projections(const Matrix& h, const std::vector<double>& n_dims, double scale) {
  Vector a = Vector::Zero(h.rows());
  for (Eigen::Index l = 0; l < h.cols(); ++l) a += n_dims[static_cast<std::size_t>(l)] * h.col(l);
  return a * scale;
}

std::vector<double> tau_from_projections(const Matrix& h, const Vector& a1, const std::vector<double>& n_dims,
                                         double scale) {
  std::vector<double> tau(static_cast<std::size_t>(h.cols()));
  for (Eigen::Index l = 0; l < h.cols(); ++l)
    tau[static_cast<std::size_t>(l)] = scale * n_dims[static_cast<std::size_t>(l)] * h.col(l).dot(a1);
  return tau;
}

}  // namespace

bool SelectionResult::contiguous() const {
  if (!ell_hat) return false;
  for (int l = 0; l <= *ell_hat; ++l)
    if (!mask[static_cast<std::size_t>(l)]) return false;
  return true;
}

Matrix channel_projections(const Matrix& s, const Vector& y, const FirstLayerDirections& q, int L) {
  const int d = q.dim();
  const GegenbauerRecurrence rec(d, L);
  const Matrix& qm = q.matrix();
  const Eigen::Index m = qm.rows();
  const Eigen::Index n = s.rows();
  Matrix h = Matrix::Zero(m, L + 1);
  std::vector<double> p(static_cast<std::size_t>(L) + 1);
  const Matrix st = s.transpose();
  for (Eigen::Index start = 0; start < m; start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, m - start);
    // column-major dots(:, i) holds <q_r, x_i> for the block's rows r
    const Matrix dots = qm.middleRows(start, rows) * st;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double yi = y(i);
      for (Eigen::Index r = 0; r < rows; ++r) {
        rec.eval(clamp_dot(dots(r, i)), p);
        for (int l = 0; l <= L; ++l) h(start + r, l) += yi * p[static_cast<std::size_t>(l)];
      }
    }
  }
  return h;
}

Vector stage1_a(const LabeledDataset& data, const FirstLayerDirections& q, int L) {
  check_inputs(data, q, L);
  const double n = static_cast<double>(data.s.rows());
  const double m = static_cast<double>(q.width());
  const Matrix h = channel_projections(data.s, data.y, q, L);
  return a_from_projections(h, dims(q.dim(), L), 1.0 / (n * std::sqrt(m)));
}

std::vector<double> stage1_tau(const LabeledDataset& data, const FirstLayerDirections& q, const Vector& a1,
                               int L) {
  check_inputs(data, q, L);
  require(a1.size() == q.width(), "stage1_tau: a1 length must equal the width m");
  const double n = static_cast<double>(data.s.rows());
  const double m = static_cast<double>(q.width());
  const Matrix h = channel_projections(data.s, data.y, q, L);
  return tau_from_projections(h, a1, dims(q.dim(), L), 1.0 / (n * std::sqrt(m)));
}

SelectionResult threshold(const std::vector<double>& tau_raw, double epsilon0, int d) {
  require(epsilon0 > 0.0, "threshold: epsilon0 must be > 0");
  require(!tau_raw.empty(), "threshold: no channels");
  SelectionResult out;
  out.tau_raw = tau_raw;
  out.epsilon0 = epsilon0;
  out.mask.resize(tau_raw.size());
  for (std::size_t l = 0; l < tau_raw.size(); ++l) {
    out.mask[l] = tau_raw[l] >= 2.0 * epsilon0;
    if (out.mask[l]) out.ell_hat = static_cast<int>(l);
  }
  out.tau_final = AttentionWeights::finalized(d, out.mask);
  return out;
}

SelectionResult select_channels(const LabeledDataset& data, const FirstLayerDirections& q, int L,
                                double epsilon0) {
  check_inputs(data, q, L);
  require(epsilon0 > 0.0, "select_channels: epsilon0 must be > 0");
  const double n = static_cast<double>(data.s.rows());
  const double m = static_cast<double>(q.width());
  const double scale = 1.0 / (n * std::sqrt(m));
  const std::vector<double> n_dims = dims(q.dim(), L);
  const Matrix h = channel_projections(data.s, data.y, q, L);
  const Vector a1 = a_from_projections(h, n_dims, scale);
  return threshold(tau_from_projections(h, a1, n_dims, scale), epsilon0, q.dim());
}

std::string selection_to_json(const SelectionResult& result) {
  nlohmann::ordered_json j;
  j["tau_raw"] = result.tau_raw;
  auto mask = nlohmann::ordered_json::array();
  for (bool b : result.mask) mask.push_back(b);
  j["mask"] = mask;
  j["ell_hat"] = result.ell_hat ? nlohmann::ordered_json(*result.ell_hat) : nlohmann::ordered_json(nullptr);
  j["epsilon0"] = result.epsilon0;
  return j.dump();
}

SelectionResult selection_from_json(const std::string& text, int d) {
  const auto j = nlohmann::json::parse(text);
  SelectionResult out = threshold(j.at("tau_raw").get<std::vector<double>>(), j.at("epsilon0").get<double>(), d);
  const auto mask = j.at("mask").get<std::vector<bool>>();
  require(mask == out.mask, "selection_from_json: mask inconsistent with tau_raw and epsilon0");
  return out;
}

}  // namespace sphattn
