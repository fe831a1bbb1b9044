// Command-line front end. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure in every trial, 1 anything else.

#include "sphattn/experiment.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Invocation {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
  std::string format = "json";
  std::string trace_out;
  std::vector<std::string> assignments;  // key=value
  std::map<std::string, std::string> flags;
};

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> text{
      {"select", "one-step channel selection over seeds, with success rate and raw weights"},
      {"calibrate-eps0", "separation of informative and redundant raw weights; suggests epsilon0"},
      {"train", "stage-two gradient descent with Monte Carlo risk and loss envelope"},
      {"risk-sweep", "stage-two risk over an n grid with a log-log slope fit"},
      {"kernel-conv", "sup |K_hat - K| over fixed pairs across an m grid"},
      {"complexity-curve", "empirical and population kernel complexities and critical radii"}};
  return text;
}

int run(const std::string& name, Invocation& inv) {
  using namespace sphattn;
  ExperimentConfig cfg = inv.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(inv.config_path);
  for (const std::string& a : inv.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + a + "'");
    cfg.set(a.substr(0, eq), a.substr(eq + 1));
  }
  for (const auto& [key, value] : inv.flags) cfg.set(key, value);
  if (inv.seed) cfg.base_seed = *inv.seed;
  if (!inv.out.empty()) cfg.output_path = inv.out;
  const ReportFormat format = parse_format(inv.format);
  cfg.validate();

  RunOptions opts;
  opts.threads = inv.threads;
  opts.trace_out = inv.trace_out;
  const auto start = std::chrono::steady_clock::now();
  const RunReport report = run_experiment(name, cfg, opts);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  emit_report(report, cfg.output_path, format);
  for (const std::string& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << name << ": " << report.records.size() << " trials, " << report.failures() << " failed, "
            << elapsed << " s\n";
  if (report.all_failed()) {
    std::cerr << "error: every trial failed; first reason: " << report.records.front().reason << '\n';
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage channel-attention experiments on the sphere"};
  app.require_subcommand(1);

  std::map<std::string, Invocation> invocations;
  std::map<std::string, std::map<std::string, std::string>> flag_values;
  for (const auto& [name, help] : descriptions()) {
    CLI::App* sub = app.add_subcommand(name, help);
    Invocation& inv = invocations[name];
    sub->add_option("--config", inv.config_path, "config file (key = value lines or JSON, reports accepted)");
    sub->add_option("--seed", inv.seed, "base seed (overrides base_seed)");
    sub->add_option("--threads", inv.threads, "maximum worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", inv.out, "output file (default: output_path, else stdout)");
    sub->add_option("--format", inv.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--trace-out", inv.trace_out, "write the loss trace of the first trial as CSV");
    sub->add_option("--set", inv.assignments, "override a config key, as key=value (repeatable)");
    for (const std::string& key : sphattn::ExperimentConfig::keys()) {
      if (key == "base_seed" || key == "output_path") continue;
      sub->add_option("--" + key, flag_values[name][key], "config key " + key);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    const std::string name = sub->get_name();
    Invocation& inv = invocations[name];
    for (const auto& [key, value] : flag_values[name])
      if (sub->count("--" + key) > 0) inv.flags[key] = value;
    try {
      return run(name, inv);
    } catch (const sphattn::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}
