#pragma once

// Seeded experiment drivers behind the CLI. Trial k uses
// trial_seed = split(base_seed, k), and its random streams are
// split(trial_seed, s) with s = 0 target/pairs, 1 data, 2 first layer,
// 3 Monte Carlo risk, 4 sketch. Streams do not depend on num_seeds, the grid
// position or the thread count, so adding seeds leaves earlier trials
// unchanged and nested grids reuse the leading rows of S and Q.

#include "sphattn/experiment_config.hpp"
#include "sphattn/report.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sphattn {

enum Stream : std::uint64_t { kTargetStream = 0, kDataStream = 1, kFirstLayerStream = 2, kRiskStream = 3, kSketchStream = 4 };

struct RunOptions {
  unsigned threads = 1;
  std::string trace_out;  // when set, the stage-two trace of trial 0 at the first grid point is written here
};

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t k);

/// Runs fn(0..count-1) on at most `threads` workers. Each index is run once;
/// the first exception (by index) is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

RunReport run_channel_selection_trials(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunReport run_calibrate_eps0(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunReport run_training_run(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunReport run_risk_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunReport run_kernel_convergence(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunReport run_complexity_curve(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Dispatches on the CLI subcommand name.
RunReport run_experiment(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Aggregates are a pure function of (experiment, config, records); reports
/// use this same function, so re-deriving from a parsed file reproduces them.
nlohmann::ordered_json summarize(const std::string& experiment, const ExperimentConfig& cfg,
                                 const std::vector<TrialRecord>& records);

struct ThresholdChoice {
  double theta = 0.0;       // selection threshold 2 * epsilon0
  double epsilon0 = 0.0;
  bool feasible = false;    // one theta separates every trial
  std::size_t separated = 0;
};

/// Picks theta from per-trial (min informative, max redundant) raw weights.
/// Feasible when max redundant < min informative across all trials: theta is
/// the midpoint of that gap. Otherwise theta is the per-trial min informative
/// value that separates the most trials (smallest such value on ties).
ThresholdChoice choose_threshold(const std::vector<double>& min_informative,
                                 const std::vector<double>& max_redundant);

/// Least-squares fit of log(y) on log(x).
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // NaN when fewer than three points
};
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

}  // namespace sphattn
