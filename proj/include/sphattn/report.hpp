#pragma once

// Run reports: per-trial records, aggregates derived only from those records,
// the config echo and warnings. JSON holds everything; CSV holds the flat
// per-trial table. No timing or host data is written, so identical configs
// produce identical files.

#include "sphattn/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sphattn {

inline constexpr const char* kSoftwareVersion = "0.1.0";

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string reason;             // failure reason when !ok
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
};

struct RunReport {
  std::string experiment;
  nlohmann::ordered_json config;
  std::vector<TrialRecord> records;
  nlohmann::ordered_json aggregates = nlohmann::ordered_json::object();
  std::vector<std::string> warnings;

  std::size_t failures() const;
  bool all_failed() const { return !records.empty() && failures() == records.size(); }
};

enum class ReportFormat { kJson, kCsv };

ReportFormat parse_format(const std::string& name);

nlohmann::ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::ordered_json& j);

/// Flat per-trial table. Scalar metrics become columns in first-seen order;
/// numeric arrays are spread over name_0, name_1, ...
std::string report_to_csv(const RunReport& report);

/// Writes JSON or CSV; I/O failures are raised with the path in the message.
void emit_report(const RunReport& report, const std::string& path, ReportFormat format);

}  // namespace sphattn
