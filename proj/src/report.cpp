#include "sphattn/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace sphattn {

using ojson = nlohmann::ordered_json;

std::size_t RunReport::failures() const {
  std::size_t count = 0;
  for (const TrialRecord& r : records) count += r.ok ? 0 : 1;
  return count;
}

ReportFormat parse_format(const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw ConfigError("unknown output format '" + name + "' (expected json or csv)");
}

ojson report_to_json(const RunReport& report) {
  ojson j;
  j["experiment"] = report.experiment;
  j["version"] = kSoftwareVersion;
  j["config"] = report.config;
  auto records = ojson::array();
  for (const TrialRecord& r : report.records) {
    ojson rec;
    rec["index"] = r.index;
    rec["seed"] = r.seed;
    rec["status"] = r.ok ? "ok" : "failed";
    rec["reason"] = r.reason;
    rec["metrics"] = r.metrics;
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  j["aggregates"] = report.aggregates;
  j["warnings"] = report.warnings;
  return j;
}

RunReport report_from_json(const ojson& j) {
  RunReport report;
  report.experiment = j.at("experiment").get<std::string>();
  report.config = j.at("config");
  for (const ojson& rec : j.at("records")) {
    TrialRecord r;
    r.index = rec.at("index").get<std::size_t>();
    r.seed = rec.at("seed").get<std::uint64_t>();
    r.ok = rec.at("status").get<std::string>() == "ok";
    r.reason = rec.at("reason").get<std::string>();
    r.metrics = rec.at("metrics");
    report.records.push_back(std::move(r));
  }
  report.aggregates = j.at("aggregates");
  report.warnings = j.at("warnings").get<std::vector<std::string>>();
  return report;
}

namespace {

std::string format_scalar(const ojson& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_number()) return v.dump();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    return quoted + "\"";
  }
  return "";
}

bool is_flat_array(const ojson& v) {
  if (!v.is_array()) return false;
  for (const ojson& e : v)
    if (e.is_array() || e.is_object()) return false;
  return true;
}

std::string complexity_table(const RunReport& report) {
  const ojson& agg = report.aggregates;
  std::ostringstream out;
  out << "eps,R_empirical,R_population\n";
  const ojson& eps = agg.at("eps");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    out << format_scalar(eps[i]) << ',' << format_scalar(agg.at("R_empirical")[i]) << ','
        << format_scalar(agg.at("R_population")[i]) << '\n';
  }
  return out.str();
}

}  // namespace

std::string report_to_csv(const RunReport& report) {
  if (report.experiment == "complexity-curve") return complexity_table(report);

  // column name -> width (1 for scalars, array length otherwise), first-seen order
  std::vector<std::pair<std::string, std::size_t>> columns;
  std::map<std::string, std::size_t> position;
  for (const TrialRecord& r : report.records) {
    for (const auto& [key, value] : r.metrics.items()) {
      if (value.is_object() || (value.is_array() && !is_flat_array(value))) continue;
      const std::size_t width = value.is_array() ? value.size() : 1;
      auto it = position.find(key);
      if (it == position.end()) {
        position[key] = columns.size();
        columns.emplace_back(key, width);
      } else {
        columns[it->second].second = std::max(columns[it->second].second, width);
      }
    }
  }
  std::vector<bool> is_array(columns.size(), false);
  for (const TrialRecord& r : report.records)
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (r.metrics.contains(columns[c].first) && r.metrics[columns[c].first].is_array()) is_array[c] = true;

  std::ostringstream out;
  out << "index,seed,status,reason";
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!is_array[c]) {
      out << ',' << columns[c].first;
      continue;
    }
    for (std::size_t k = 0; k < columns[c].second; ++k) out << ',' << columns[c].first << '_' << k;
  }
  out << '\n';
  for (const TrialRecord& r : report.records) {
    out << r.index << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',' << format_scalar(ojson(r.reason));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& key = columns[c].first;
      const ojson value = r.metrics.contains(key) ? r.metrics[key] : ojson();
      if (!is_array[c]) {
        out << ',' << format_scalar(value);
        continue;
      }
      for (std::size_t k = 0; k < columns[c].second; ++k)
        out << ',' << (value.is_array() && k < value.size() ? format_scalar(value[k]) : "");
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(const RunReport& report, const std::string& path, ReportFormat format) {
  const std::string body = format == ReportFormat::kJson ? report_to_json(report).dump(2) + "\n" : report_to_csv(report);
  if (path.empty() || path == "-") {
    std::fwrite(body.data(), 1, body.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open report file " + path + " for writing");
  out << body;
  out.flush();
  if (!out) throw std::runtime_error("failed writing report file " + path);
}

}  // namespace sphattn
