#include "sphattn/experiment_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <type_traits>

namespace sphattn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("config key '" + key + "': cannot use '" + value + "' (" + why + ")");
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  std::istringstream in(value);
  T out{};
  in >> out;
  if (value.empty() || in.fail() || !in.eof()) bad_value(key, value, "not a number");
  if constexpr (std::is_unsigned_v<T>) {
    if (value.front() == '-') bad_value(key, value, "must be non-negative");
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::string value = trim(raw);
  if (!value.empty() && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
  std::vector<T> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "expected true or false");
}

template <typename T>
bool strictly_increasing(const std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i - 1] < v[i])) return false;
  return true;
}

void check(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> all{
      "d",          "ell0",      "L",       "n",          "m",           "eta",
      "T",          "sigma0",    "epsilon0", "coeffs",    "directions_per_degree",
      "num_seeds",  "num_mc_samples",       "base_seed",  "output_path", "channels",
      "ell_hat",    "num_pairs", "noise_only",           "checkpoints", "eps_min",
      "eps_max",    "eps_points", "backend", "gram"};
  return all;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "d") d = parse_number<int>(key, value);
  else if (key == "ell0") ell0 = parse_number<int>(key, value);
  else if (key == "L") L = parse_number<int>(key, value);
  else if (key == "n") n_grid = parse_list<std::size_t>(key, value);
  else if (key == "m") m_grid = parse_list<std::size_t>(key, value);
  else if (key == "eta") eta = parse_number<double>(key, value);
  else if (key == "T") T = value == "auto" ? std::nullopt : std::optional(parse_number<std::size_t>(key, value));
  else if (key == "sigma0") sigma0 = parse_number<double>(key, value);
  else if (key == "epsilon0") epsilon0 = parse_number<double>(key, value);
  else if (key == "coeffs") coeffs = parse_list<double>(key, value);
  else if (key == "directions_per_degree") directions_per_degree = parse_number<int>(key, value);
  else if (key == "num_seeds") num_seeds = parse_number<std::size_t>(key, value);
  else if (key == "num_mc_samples") num_mc_samples = parse_number<std::size_t>(key, value);
  else if (key == "base_seed") base_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "output_path") output_path = value;
  else if (key == "channels") {
    if (value == "oracle") channels = ChannelMode::kOracle;
    else if (value == "select") channels = ChannelMode::kSelect;
    else bad_value(key, value, "expected oracle or select");
  } else if (key == "ell_hat") {
    ell_hat = value == "auto" ? std::nullopt : std::optional(parse_number<int>(key, value));
  } else if (key == "num_pairs") num_pairs = parse_number<std::size_t>(key, value);
  else if (key == "noise_only") noise_only = parse_bool(key, value);
  else if (key == "checkpoints") checkpoints = parse_list<std::size_t>(key, value);
  else if (key == "eps_min") eps_min = parse_number<double>(key, value);
  else if (key == "eps_max") eps_max = parse_number<double>(key, value);
  else if (key == "eps_points") eps_points = parse_number<std::size_t>(key, value);
  else if (key == "backend") {
    if (value != "auto" && value != "dense" && value != "compressed")
      bad_value(key, value, "expected auto, dense or compressed");
    backend = value;
  } else if (key == "gram") {
    if (value == "population") gram = GramKind::kPopulation;
    else if (value == "empirical") gram = GramKind::kEmpirical;
    else bad_value(key, value, "expected population or empirical");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  check(d >= 2, "d must be >= 2");
  check(ell0 >= 0, "ell0 must be >= 0");
  check(L >= 0, "L must be >= 0");
  check(!n_grid.empty() && strictly_increasing(n_grid), "n grid must be non-empty and strictly increasing");
  check(!m_grid.empty() && strictly_increasing(m_grid), "m grid must be non-empty and strictly increasing");
  check(n_grid.front() >= 1 && m_grid.front() >= 1, "grid entries must be >= 1");
  check(eta > 0.0 && std::isfinite(eta), "eta must be > 0");
  check(!T || *T >= 1, "T must be >= 1 or auto");
  check(sigma0 >= 0.0 && std::isfinite(sigma0), "sigma0 must be >= 0");
  check(epsilon0 > 0.0, "epsilon0 must be > 0");
  check(coeffs.size() == static_cast<std::size_t>(ell0) + 1, "coeffs must hold ell0 + 1 values");
  check(noise_only || coeffs.back() != 0.0, "leading coefficient c_ell0 must be nonzero");
  check(directions_per_degree >= 1, "directions_per_degree must be >= 1");
  check(num_seeds >= 1, "num_seeds must be >= 1");
  check(num_mc_samples >= 2, "num_mc_samples must be >= 2");
  check(!ell_hat || *ell_hat >= 0, "ell_hat must be >= 0 or auto");
  check(num_pairs >= 1, "num_pairs must be >= 1");
  check(strictly_increasing(checkpoints) && (checkpoints.empty() || checkpoints.front() >= 1),
        "checkpoints must be strictly increasing and >= 1");
  check(eps_min > 0.0 && eps_max > eps_min, "need 0 < eps_min < eps_max");
  check(eps_points >= 2, "eps_points must be >= 2");
}

std::vector<std::string> ExperimentConfig::warnings() const {
  std::vector<std::string> out;
  if (L < ell0) out.push_back("L < ell0: channel selection cannot recover ell0");
  return out;
}

std::size_t ExperimentConfig::steps_for(std::size_t n) const {
  if (T) return *T;
  const double steps = static_cast<double>(n) / (eta * std::pow(static_cast<double>(d), ell0));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(steps)));
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["ell0"] = ell0;
  j["L"] = L;
  j["n"] = n_grid;
  j["m"] = m_grid;
  j["eta"] = eta;
  j["T"] = T ? nlohmann::ordered_json(*T) : nlohmann::ordered_json("auto");
  j["sigma0"] = sigma0;
  j["epsilon0"] = epsilon0;
  j["coeffs"] = coeffs;
  j["directions_per_degree"] = directions_per_degree;
  j["num_seeds"] = num_seeds;
  j["num_mc_samples"] = num_mc_samples;
  j["base_seed"] = base_seed;
  j["output_path"] = output_path;
  j["channels"] = channels == ChannelMode::kOracle ? "oracle" : "select";
  j["ell_hat"] = ell_hat ? nlohmann::ordered_json(*ell_hat) : nlohmann::ordered_json("auto");
  j["num_pairs"] = num_pairs;
  j["noise_only"] = noise_only;
  j["checkpoints"] = checkpoints;
  j["eps_min"] = eps_min;
  j["eps_max"] = eps_max;
  j["eps_points"] = eps_points;
  j["backend"] = backend;
  j["gram"] = gram == GramKind::kPopulation ? "population" : "empirical";
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& root) {
  const nlohmann::json& j = root.contains("config") && root["config"].is_object() ? root["config"] : root;
  if (!j.is_object()) throw ConfigError("JSON config must be an object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      std::ostringstream out;
      out.precision(17);
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out << ',';
        if (value[i].is_number_float()) out << value[i].get<double>();
        else out << value[i].dump();
      }
      text = out.str();
    } else if (value.is_number_float()) {
      std::ostringstream out;
      out.precision(17);
      out << value.get<double>();
      text = out.str();
    } else {
      text = value.dump();
    }
    cfg.set(key, text);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    return from_json(j);
  }
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace sphattn
