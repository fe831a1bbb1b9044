#pragma once

// Experiment configuration: a flat `key = value` text file ('#' starts a
// comment, lists are comma separated) or a JSON object with the same keys.
// A report's JSON is accepted too; its "config" member is used.

#include "sphattn/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sphattn {

enum class ChannelMode { kOracle, kSelect };
enum class GramKind { kPopulation, kEmpirical };

struct ExperimentConfig {
  int d = 4;
  int ell0 = 1;
  int L = 3;
  std::vector<std::size_t> n_grid{1000};
  std::vector<std::size_t> m_grid{2000};
  double eta = 0.5;
  std::optional<std::size_t> T;  // empty means auto
  double sigma0 = 0.1;
  double epsilon0 = 0.05;
  std::vector<double> coeffs{1.0, 1.0};
  int directions_per_degree = 1;
  std::size_t num_seeds = 5;
  std::size_t num_mc_samples = 20000;
  std::uint64_t base_seed = 1;
  std::string output_path;
  ChannelMode channels = ChannelMode::kOracle;
  std::optional<int> ell_hat;  // kernel degree for kernel-conv and complexity-curve; empty means ell0
  std::size_t num_pairs = 200;
  bool noise_only = false;
  std::vector<std::size_t> checkpoints;
  double eps_min = 1e-3;
  double eps_max = 1.0;
  std::size_t eps_points = 25;
  std::string backend = "auto";  // auto | dense | compressed
  GramKind gram = GramKind::kPopulation;

  /// Throws ConfigError on any violated constraint.
  void validate() const;
  /// Non-fatal observations (for instance L < ell0) echoed into reports.
  std::vector<std::string> warnings() const;

  /// T for sample size n: the configured value, or max(1, round(n / (eta d^ell0))).
  std::size_t steps_for(std::size_t n) const;
  int kernel_degree() const { return ell_hat.value_or(ell0); }

  /// Applies one key/value pair using the text-format value syntax.
  void set(const std::string& key, const std::string& value);

  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Detects JSON by a leading '{'; otherwise parses key = value lines.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  static const std::vector<std::string>& keys();
};

}  // namespace sphattn
