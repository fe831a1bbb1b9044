#include "sphattn/experiment.hpp"

#include "sphattn/channel_select.hpp"
#include "sphattn/complexity.hpp"
#include "sphattn/gd_trainer.hpp"
#include "sphattn/kernel_engine.hpp"
#include "sphattn/sphere_harmonics.hpp"
#include "sphattn/target_synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace sphattn {

using ojson = nlohmann::ordered_json;

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t k) { return split_seed(cfg.base_seed, k); }

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_loglog: need at least two paired points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "fit_loglog: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  require(sxx > 0.0, "fit_loglog: x values must not all coincide");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.slope_se = std::numeric_limits<double>::quiet_NaN();
  if (x.size() >= 3) {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = std::log(y[i]) - (fit.intercept + fit.slope * std::log(x[i]));
      sse += r * r;
    }
    fit.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
  }
  return fit;
}

ThresholdChoice choose_threshold(const std::vector<double>& min_informative,
                                 const std::vector<double>& max_redundant) {
  require(!min_informative.empty() && min_informative.size() == max_redundant.size(),
          "choose_threshold: need paired, non-empty inputs");
  const double lo = *std::max_element(max_redundant.begin(), max_redundant.end());
  const double hi = *std::min_element(min_informative.begin(), min_informative.end());
  auto separated = [&](double theta) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < min_informative.size(); ++i)
      count += (max_redundant[i] < theta && theta <= min_informative[i]) ? 1 : 0;
    return count;
  };
  ThresholdChoice out;
  if (lo < hi && hi > 0.0) {
    out.theta = 0.5 * (std::max(lo, 0.0) + hi);
    out.feasible = true;
  } else {
    std::vector<double> candidates = min_informative;
    std::sort(candidates.begin(), candidates.end());
    std::size_t best = 0;
    out.theta = candidates.back();
    for (double theta : candidates) {
      if (theta <= 0.0) continue;
      const std::size_t count = separated(theta);
      if (count > best) {
        best = count;
        out.theta = theta;
      }
    }
  }
  out.theta = std::max(out.theta, 1e-300);
  out.epsilon0 = 0.5 * out.theta;
  out.separated = separated(out.theta);
  return out;
}

namespace {

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::vector<double> eps_grid(const ExperimentConfig& cfg) {
  std::vector<double> out(cfg.eps_points);
  const double ratio = cfg.eps_max / cfg.eps_min;
  for (std::size_t i = 0; i < cfg.eps_points; ++i)
    out[i] = cfg.eps_min * std::pow(ratio, static_cast<double>(i) / static_cast<double>(cfg.eps_points - 1));
  return out;
}

ZonalTarget build_target(const ExperimentConfig& cfg, std::uint64_t trial) {
  if (cfg.noise_only) return ZonalTarget{cfg.d, 0, {0.0}, {}};
  return make_target(cfg.d, cfg.ell0, cfg.coeffs, split_seed(trial, kTargetStream), cfg.directions_per_degree);
}

LabeledDataset build_data(const ExperimentConfig& cfg, const ZonalTarget& target, std::size_t n,
                          std::uint64_t trial) {
  const std::uint64_t seed = split_seed(trial, kDataStream);
  return cfg.noise_only ? gen_noise_dataset(cfg.d, n, cfg.sigma0, seed) : gen_dataset(target, n, cfg.sigma0, seed);
}

FeatureBackend backend_of(const std::string& name) {
  if (name == "dense") return FeatureBackend::kDense;
  if (name == "compressed") return FeatureBackend::kCompressed;
  return FeatureBackend::kAuto;
}

// Runs `body` for every (grid point, seed) pair; failures become failed records.
std::vector<TrialRecord> run_trials(const ExperimentConfig& cfg, std::size_t grid_points, const RunOptions& opts,
                                    const std::function<void(std::size_t, std::size_t, TrialRecord&)>& body) {
  std::vector<TrialRecord> records(grid_points * cfg.num_seeds);
  parallel_for(records.size(), opts.threads, [&](std::size_t i) {
    const std::size_t g = i / cfg.num_seeds;
    const std::size_t k = i % cfg.num_seeds;
    TrialRecord& rec = records[i];
    rec.index = i;
    rec.seed = trial_seed(cfg, k);
    try {
      body(g, k, rec);
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.reason = e.what();
    }
  });
  return records;
}

// --- stage one -------------------------------------------------------------

void stage_one_metrics(const ExperimentConfig& cfg, const std::vector<double>& tau_raw, ojson& metrics) {
  const int informative_top = std::min(cfg.ell0, cfg.L);
  double min_inf = std::numeric_limits<double>::infinity();
  double max_red = 0.0;
  for (int l = 0; l <= cfg.L; ++l) {
    const double t = tau_raw[static_cast<std::size_t>(l)];
    if (l <= informative_top) min_inf = std::min(min_inf, t);
    else max_red = std::max(max_red, std::abs(t));
  }
  metrics["tau_raw"] = tau_raw;
  metrics["min_informative"] = min_inf;
  metrics["max_redundant"] = max_red;
  metrics["gap"] = min_inf - max_red;
}

std::vector<double> stage_one_tau(const ExperimentConfig& cfg, std::size_t n, std::size_t m, std::uint64_t trial,
                                  ojson& metrics) {
  const ZonalTarget target = build_target(cfg, trial);
  const LabeledDataset data = build_data(cfg, target, n, trial);
  const auto q = FirstLayerDirections::sample(m, cfg.d, split_seed(trial, kFirstLayerStream));
  metrics["n"] = n;
  metrics["m"] = m;
  const Vector a1 = stage1_a(data, q, cfg.L);
  return stage1_tau(data, q, a1, cfg.L);
}

void per_channel_stats(const std::vector<TrialRecord>& records, ojson& agg) {
  std::vector<std::vector<double>> by_channel;
  for (const TrialRecord& r : records) {
    if (!r.metrics.contains("tau_raw")) continue;
    const auto tau = r.metrics["tau_raw"].get<std::vector<double>>();
    if (by_channel.size() < tau.size()) by_channel.resize(tau.size());
    for (std::size_t l = 0; l < tau.size(); ++l) by_channel[l].push_back(tau[l]);
  }
  std::vector<double> mean, lo, hi;
  for (const auto& values : by_channel) {
    double sum = 0.0;
    for (double v : values) sum += v;
    mean.push_back(sum / static_cast<double>(values.size()));
    lo.push_back(*std::min_element(values.begin(), values.end()));
    hi.push_back(*std::max_element(values.begin(), values.end()));
  }
  agg["tau_mean"] = mean;
  agg["tau_min"] = lo;
  agg["tau_max"] = hi;
}

double fraction(std::size_t part, std::size_t whole) {
  return whole ? static_cast<double>(part) / static_cast<double>(whole) : std::numeric_limits<double>::quiet_NaN();
}

bool metric_true(const TrialRecord& r, const char* key) {
  return r.metrics.contains(key) && r.metrics[key].is_boolean() && r.metrics[key].get<bool>();
}

ojson summarize_selection(const std::vector<TrialRecord>& records) {
  std::size_t success = 0, empty = 0, gap_positive = 0, noncontiguous = 0;
  for (const TrialRecord& r : records) {
    success += metric_true(r, "success") ? 1 : 0;
    empty += r.metrics.contains("ell_hat") && r.metrics["ell_hat"].is_null() ? 1 : 0;
    gap_positive += r.metrics.contains("gap") && r.metrics["gap"].get<double>() > 0.0 ? 1 : 0;
    noncontiguous += r.metrics.contains("contiguous") && !r.metrics["contiguous"].get<bool>() &&
                             !r.metrics["ell_hat"].is_null()
                         ? 1
                         : 0;
  }
  ojson agg;
  agg["trials"] = records.size();
  agg["successes"] = success;
  agg["success_rate"] = fraction(success, records.size());
  agg["empty_rate"] = fraction(empty, records.size());
  agg["gap_positive_rate"] = fraction(gap_positive, records.size());
  agg["noncontiguous"] = noncontiguous;
  per_channel_stats(records, agg);
  return agg;
}

ojson summarize_calibration(const std::vector<TrialRecord>& records) {
  std::vector<double> min_inf, max_red;
  for (const TrialRecord& r : records) {
    if (!r.ok) continue;
    min_inf.push_back(r.metrics["min_informative"].get<double>());
    max_red.push_back(r.metrics["max_redundant"].get<double>());
  }
  ojson agg;
  agg["trials"] = records.size();
  if (min_inf.empty()) {
    agg["epsilon0"] = nullptr;
    return agg;
  }
  const ThresholdChoice choice = choose_threshold(min_inf, max_red);
  agg["max_redundant"] = *std::max_element(max_red.begin(), max_red.end());
  agg["min_informative"] = *std::min_element(min_inf.begin(), min_inf.end());
  agg["feasible"] = choice.feasible;
  agg["theta"] = choice.theta;
  agg["epsilon0"] = choice.epsilon0;
  agg["separated"] = choice.separated;
  agg["separated_rate"] = fraction(choice.separated, records.size());
  per_channel_stats(records, agg);
  return agg;
}

// --- stage two -------------------------------------------------------------

// max_i |K_hat(x_{2i}, x_{2i+1}) - K(x_{2i}, x_{2i+1})| over up to `pairs` disjoint training pairs.
double width_diagnostic(const Matrix& s, const FirstLayerDirections& q, const AttentionWeights& tau,
                        std::size_t pairs) {
  const auto count = static_cast<Eigen::Index>(std::min<std::size_t>(pairs, static_cast<std::size_t>(s.rows()) / 2));
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  Matrix left(count, s.cols()), right(count, s.cols());
  for (Eigen::Index i = 0; i < count; ++i) {
    left.row(i) = s.row(2 * i);
    right.row(i) = s.row(2 * i + 1);
  }
  const Matrix al = activation_matrix(left, q.matrix(), tau);
  const Matrix ar = activation_matrix(right, q.matrix(), tau);
  const double m = static_cast<double>(q.width());
  const int d = q.dim();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    const double k_hat = al.row(i).dot(ar.row(i)) / m;
    const std::vector<double> p = gegenbauer_all(left.row(i).dot(right.row(i)), d, tau.max_degree());
    double k = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) k += tau.tau[l] != 0.0 ? p[l] : 0.0;
    worst = std::max(worst, std::abs(k_hat - k));
  }
  return worst;
}

void stage_two_trial(const ExperimentConfig& cfg, std::size_t n, const RunOptions& opts,
                     bool write_trace, TrialRecord& rec) {
  const std::uint64_t trial = rec.seed;
  const std::size_t m = cfg.m_grid.front();
  const std::size_t steps = cfg.steps_for(n);
  ojson& mt = rec.metrics;
  mt["n"] = n;
  mt["m"] = m;
  mt["T"] = steps;
  mt["eta"] = cfg.eta;

  const ZonalTarget target = build_target(cfg, trial);
  const LabeledDataset data = build_data(cfg, target, n, trial);
  const auto q = FirstLayerDirections::sample(m, cfg.d, split_seed(trial, kFirstLayerStream));

  AttentionWeights tau;
  if (cfg.channels == ChannelMode::kOracle) {
    mt["channels"] = "oracle";
    tau = AttentionWeights::oracle(cfg.d, cfg.ell0);
  } else {
    mt["channels"] = "select";
    const SelectionResult sel = select_channels(data, q, cfg.L, cfg.epsilon0);
    mt["tau_raw"] = sel.tau_raw;
    mt["mask"] = sel.mask;
    if (sel.empty()) {
      mt["ell_hat"] = nullptr;
      rec.ok = false;
      rec.reason = "empty selection: no channel reached 2 * epsilon0";
      return;
    }
    tau = sel.tau_final;
  }
  mt["ell_hat"] = tau.highest_active();
  mt["rank"] = tau.rank(cfg.d);

  TrainOptions options;
  options.eta = cfg.eta;
  options.steps = steps;
  options.backend = backend_of(cfg.backend);
  options.sketch_seed = split_seed(trial, kSketchStream);
  for (std::size_t t : cfg.checkpoints)
    if (t <= steps) options.checkpoints.push_back(t);
  const TrainResult result = train(data, q, tau, options);
  const TrainingTrace& trace = result.trace;
  if (write_trace) write_trace_csv(opts.trace_out, trace);
  mt["backend"] = result.state.features->dense() ? "dense" : "compressed";
  mt["final_loss"] = trace.loss.back();
  mt["final_empirical_loss"] = trace.clean_loss.back();

  const std::uint64_t risk_seed = split_seed(trial, kRiskStream);
  auto risk_of = [&](const Vector& a) {
    return mc_risk(BatchPredictor([&](const Matrix& x) { return predict(a, x, q, tau); }), target,
                   cfg.num_mc_samples, risk_seed);
  };
  const RiskEstimate risk = risk_of(result.state.weights());
  mt["risk"] = risk.estimate;
  mt["risk_se"] = risk.std_error;
  if (!trace.snapshot_steps.empty()) {
    std::vector<double> risks;
    for (const Vector& a : trace.snapshots) risks.push_back(risk_of(a).estimate);
    mt["checkpoint_t"] = trace.snapshot_steps;
    mt["checkpoint_risk"] = risks;
  }

  // loss(t) <= C / (eta t) on [10, T] with C fitted at t = 10
  if (steps >= 10) {
    const double c = trace.clean_loss[10] * cfg.eta * 10.0;
    double worst = 0.0;
    for (std::size_t t = 10; t <= steps; ++t) {
      const double scaled = trace.clean_loss[t] * cfg.eta * static_cast<double>(t);
      worst = std::max(worst, c > 0.0 ? scaled / c : (scaled > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    }
    mt["envelope_C"] = c;
    mt["envelope_ratio"] = number_or_null(worst);
    mt["envelope_ok"] = worst <= 1.0 + 1e-12;
  } else {
    mt["envelope_C"] = nullptr;
    mt["envelope_ratio"] = nullptr;
    mt["envelope_ok"] = nullptr;
  }

  const double kernel_error = width_diagnostic(data.s, q, tau, cfg.num_pairs);
  mt["kernel_error"] = number_or_null(kernel_error);
  mt["width_ok"] = std::isfinite(kernel_error) && kernel_error <= 0.1 * risk.estimate;
}

ojson summarize_stage_two(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
  ojson agg;
  auto groups = ojson::array();
  std::vector<double> xs, ys;
  std::size_t completed_total = 0, envelope_pass = 0, envelope_evaluated = 0, width_flags = 0;
  for (std::size_t n : cfg.n_grid) {
    std::vector<double> risk, loss, emp;
    std::size_t completed = 0, failed = 0;
    for (const TrialRecord& r : records) {
      if (r.metrics.at("n").get<std::size_t>() != n) continue;
      if (!r.ok) {
        ++failed;
        continue;
      }
      ++completed;
      risk.push_back(r.metrics["risk"].get<double>());
      loss.push_back(r.metrics["final_loss"].get<double>());
      emp.push_back(r.metrics["final_empirical_loss"].get<double>());
    }
    ojson g;
    g["n"] = n;
    g["T"] = cfg.steps_for(n);
    g["completed"] = completed;
    g["failed"] = failed;
    const double med = median(risk);
    g["median_risk"] = number_or_null(med);
    g["median_final_loss"] = number_or_null(median(loss));
    g["median_empirical_loss"] = number_or_null(median(emp));
    groups.push_back(g);
    completed_total += completed;
    if (std::isfinite(med) && med > 0.0) {
      xs.push_back(static_cast<double>(n));
      ys.push_back(med);
    }
  }
  for (const TrialRecord& r : records) {
    if (r.metrics.contains("envelope_ok") && !r.metrics["envelope_ok"].is_null()) {
      ++envelope_evaluated;
      envelope_pass += r.metrics["envelope_ok"].get<bool>() ? 1 : 0;
    }
    if (r.ok && r.metrics.contains("width_ok") && !r.metrics["width_ok"].get<bool>()) ++width_flags;
  }
  agg["trials"] = records.size();
  agg["completed"] = completed_total;
  agg["success_rate"] = fraction(completed_total, records.size());
  agg["per_n"] = groups;
  if (xs.size() >= 2) {
    const LogLogFit fit = fit_loglog(xs, ys);
    agg["slope"] = fit.slope;
    agg["slope_se"] = number_or_null(fit.slope_se);
    agg["intercept"] = fit.intercept;
  } else {
    agg["slope"] = nullptr;
    agg["slope_se"] = nullptr;
    agg["intercept"] = nullptr;
  }
  agg["envelope_evaluated"] = envelope_evaluated;
  agg["envelope_pass"] = envelope_pass;
  agg["envelope_pass_rate"] = fraction(envelope_pass, records.size());
  agg["width_flags"] = width_flags;
  return agg;
}

// --- kernel convergence ----------------------------------------------------

ojson summarize_kernel(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
  ojson agg;
  auto groups = ojson::array();
  std::vector<double> xs, ys;
  for (std::size_t m : cfg.m_grid) {
    std::vector<double> errors;
    for (const TrialRecord& r : records)
      if (r.ok && r.metrics.at("m").get<std::size_t>() == m) errors.push_back(r.metrics["error"].get<double>());
    const double med = median(errors);
    groups.push_back({{"m", m}, {"completed", errors.size()}, {"median_error", number_or_null(med)}});
    if (std::isfinite(med) && med > 0.0) {
      xs.push_back(static_cast<double>(m));
      ys.push_back(med);
    }
  }
  agg["ell_hat"] = cfg.kernel_degree();
  agg["per_m"] = groups;
  if (xs.size() >= 2) {
    const LogLogFit fit = fit_loglog(xs, ys);
    agg["slope"] = fit.slope;
    agg["slope_se"] = number_or_null(fit.slope_se);
  } else {
    agg["slope"] = nullptr;
    agg["slope_se"] = nullptr;
  }
  return agg;
}

// --- complexity curve ------------------------------------------------------

ojson summarize_complexity(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
  const std::vector<double> eps = eps_grid(cfg);
  const std::size_t n = cfg.n_grid.front();
  const int ell_hat = cfg.kernel_degree();
  std::vector<double> mean(eps.size(), 0.0), pop(eps.size());
  std::size_t completed = 0;
  std::vector<double> ratios;
  const double pop_radius =
      critical_radius([&](double e) { return population_complexity(cfg.d, ell_hat, n, e); }, cfg.sigma0);
  for (const TrialRecord& r : records) {
    if (!r.ok) continue;
    ++completed;
    const auto curve = r.metrics["R_empirical"].get<std::vector<double>>();
    for (std::size_t i = 0; i < eps.size(); ++i) mean[i] += curve[i];
    const double rad = r.metrics["critical_radius"].get<double>();
    ratios.push_back(rad * rad / (pop_radius * pop_radius));
  }
  for (std::size_t i = 0; i < eps.size(); ++i) {
    mean[i] = completed ? mean[i] / static_cast<double>(completed) : std::numeric_limits<double>::quiet_NaN();
    pop[i] = population_complexity(cfg.d, ell_hat, n, eps[i]);
  }
  ojson agg;
  agg["n"] = n;
  agg["ell_hat"] = ell_hat;
  agg["eps"] = eps;
  auto mean_json = ojson::array();
  for (double v : mean) mean_json.push_back(number_or_null(v));
  agg["R_empirical"] = mean_json;
  agg["R_population"] = pop;
  agg["critical_radius_population"] = pop_radius;
  agg["critical_radius_sq_population"] = pop_radius * pop_radius;
  agg["completed"] = completed;
  agg["median_radius_sq_ratio"] = number_or_null(median(ratios));
  agg["min_radius_sq_ratio"] =
      ratios.empty() ? ojson(nullptr) : ojson(*std::min_element(ratios.begin(), ratios.end()));
  agg["max_radius_sq_ratio"] =
      ratios.empty() ? ojson(nullptr) : ojson(*std::max_element(ratios.begin(), ratios.end()));
  return agg;
}

std::vector<std::string> collect_warnings(const ExperimentConfig& cfg, const std::string& experiment,
                                          const std::vector<TrialRecord>& records) {
  std::vector<std::string> out = cfg.warnings();
  if (cfg.m_grid.size() > 1 && experiment != "kernel-conv")
    out.push_back("only the first m grid value is used by " + experiment);
  if (cfg.n_grid.size() > 1 && (experiment == "select" || experiment == "calibrate-eps0" ||
                                experiment == "complexity-curve" || experiment == "kernel-conv"))
    out.push_back("only the first n grid value is used by " + experiment);
  std::size_t failed = 0, noncontiguous = 0, width = 0;
  for (const TrialRecord& r : records) {
    failed += r.ok ? 0 : 1;
    if (r.metrics.contains("contiguous") && !r.metrics["contiguous"].get<bool>() && !r.metrics["ell_hat"].is_null())
      ++noncontiguous;
    if (r.ok && r.metrics.contains("width_ok") && !r.metrics["width_ok"].get<bool>()) ++width;
  }
  if (failed)
    out.push_back(std::to_string(failed) + " of " + std::to_string(records.size()) +
                  " trials failed and are excluded from medians");
  if (noncontiguous)
    out.push_back(std::to_string(noncontiguous) + " trials selected a non-contiguous channel set");
  if (width)
    out.push_back(std::to_string(width) +
                  " trials have a kernel approximation error above one tenth of the measured risk");
  return out;
}

RunReport finish(const std::string& experiment, const ExperimentConfig& cfg, std::vector<TrialRecord> records) {
  RunReport report;
  report.experiment = experiment;
  report.config = cfg.to_json();
  report.aggregates = summarize(experiment, cfg, records);
  report.warnings = collect_warnings(cfg, experiment, records);
  report.records = std::move(records);
  return report;
}

}  // namespace

nlohmann::ordered_json summarize(const std::string& experiment, const ExperimentConfig& cfg,
                                 const std::vector<TrialRecord>& records) {
  if (experiment == "select") return summarize_selection(records);
  if (experiment == "calibrate-eps0") return summarize_calibration(records);
  if (experiment == "train" || experiment == "risk-sweep") return summarize_stage_two(cfg, records);
  if (experiment == "kernel-conv") return summarize_kernel(cfg, records);
  if (experiment == "complexity-curve") return summarize_complexity(cfg, records);
  throw ConfigError("unknown experiment '" + experiment + "'");
}

RunReport run_channel_selection_trials(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  auto records = run_trials(cfg, 1, opts, [&](std::size_t, std::size_t, TrialRecord& rec) {
    const std::vector<double> tau_raw =
        stage_one_tau(cfg, cfg.n_grid.front(), cfg.m_grid.front(), rec.seed, rec.metrics);
    stage_one_metrics(cfg, tau_raw, rec.metrics);
    const SelectionResult sel = threshold(tau_raw, cfg.epsilon0, cfg.d);
    rec.metrics["mask"] = sel.mask;
    rec.metrics["ell_hat"] = sel.ell_hat ? ojson(*sel.ell_hat) : ojson(nullptr);
    rec.metrics["epsilon0"] = cfg.epsilon0;
    rec.metrics["contiguous"] = sel.contiguous();
    rec.metrics["success"] = cfg.noise_only ? sel.empty() : (sel.ell_hat && *sel.ell_hat == cfg.ell0);
    if (sel.empty()) {
      rec.ok = false;
      rec.reason = "empty selection: no channel reached 2 * epsilon0";
    }
  });
  return finish("select", cfg, std::move(records));
}

RunReport run_calibrate_eps0(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.noise_only) throw ConfigError("calibrate-eps0 needs signal runs (noise_only = false)");
  auto records = run_trials(cfg, 1, opts, [&](std::size_t, std::size_t, TrialRecord& rec) {
    const std::vector<double> tau_raw =
        stage_one_tau(cfg, cfg.n_grid.front(), cfg.m_grid.front(), rec.seed, rec.metrics);
    stage_one_metrics(cfg, tau_raw, rec.metrics);
  });
  return finish("calibrate-eps0", cfg, std::move(records));
}

namespace {

RunReport stage_two_report(const std::string& experiment, const ExperimentConfig& cfg, const RunOptions& opts) {
  auto records = run_trials(cfg, cfg.n_grid.size(), opts, [&](std::size_t g, std::size_t k, TrialRecord& rec) {
    const bool write_trace = !opts.trace_out.empty() && g == 0 && k == 0;
    stage_two_trial(cfg, cfg.n_grid[g], opts, write_trace, rec);
  });
  return finish(experiment, cfg, std::move(records));
}

}  // namespace

RunReport run_training_run(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  return stage_two_report("train", cfg, opts);
}

RunReport run_risk_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.n_grid.size() < 4 || cfg.n_grid.back() < 10 * cfg.n_grid.front())
    throw ConfigError("risk-sweep needs an n grid of at least 4 points spanning a decade");
  return stage_two_report("risk-sweep", cfg, opts);
}

RunReport run_kernel_convergence(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.m_grid.size() < 3) throw ConfigError("kernel-conv needs an m grid of at least 3 points");
  const int ell_hat = cfg.kernel_degree();
  const AttentionWeights tau = AttentionWeights::oracle(cfg.d, ell_hat);
  auto records = run_trials(cfg, cfg.m_grid.size(), opts, [&](std::size_t g, std::size_t, TrialRecord& rec) {
    const std::size_t m = cfg.m_grid[g];
    const Matrix left = sample_sphere(cfg.num_pairs, cfg.d, split_seed(rec.seed, kTargetStream));
    const Matrix right = sample_sphere(cfg.num_pairs, cfg.d, split_seed(rec.seed, kDataStream));
    const auto q = FirstLayerDirections::sample(m, cfg.d, split_seed(rec.seed, kFirstLayerStream));
    const Matrix al = activation_matrix(left, q.matrix(), tau);
    const Matrix ar = activation_matrix(right, q.matrix(), tau);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < left.rows(); ++i) {
      const double k_hat = al.row(i).dot(ar.row(i)) / static_cast<double>(m);
      const std::vector<double> p = gegenbauer_all(left.row(i).dot(right.row(i)), cfg.d, ell_hat);
      double k = 0.0;
      for (double v : p) k += v;
      worst = std::max(worst, std::abs(k_hat - k));
    }
    rec.metrics["m"] = m;
    rec.metrics["ell_hat"] = ell_hat;
    rec.metrics["pairs"] = cfg.num_pairs;
    rec.metrics["error"] = worst;
  });
  return finish("kernel-conv", cfg, std::move(records));
}

RunReport run_complexity_curve(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.sigma0 <= 0.0) throw ConfigError("complexity-curve needs sigma0 > 0");
  const int ell_hat = cfg.kernel_degree();
  const std::size_t n = cfg.n_grid.front();
  const std::vector<double> eps = eps_grid(cfg);
  auto records = run_trials(cfg, 1, opts, [&](std::size_t, std::size_t, TrialRecord& rec) {
    const Matrix x = sample_sphere(n, cfg.d, split_seed(rec.seed, kDataStream));
    Matrix k;
    if (cfg.gram == GramKind::kPopulation) {
      k = population_gram(x, x, ell_hat);
    } else {
      const auto q = FirstLayerDirections::sample(cfg.m_grid.front(), cfg.d, split_seed(rec.seed, kFirstLayerStream));
      k = empirical_gram(x, x, q, AttentionWeights::oracle(cfg.d, ell_hat));
    }
    const KernelSpectrum spectrum = KernelSpectrum::empirical(gram_spectrum(normalized_gram(k, n)), n);
    std::vector<double> curve;
    for (double e : eps) curve.push_back(empirical_complexity(spectrum, e));
    const double radius = critical_radius([&](double e) { return empirical_complexity(spectrum, e); }, cfg.sigma0);
    rec.metrics["n"] = n;
    rec.metrics["gram"] = cfg.gram == GramKind::kPopulation ? "population" : "empirical";
    rec.metrics["critical_radius"] = radius;
    rec.metrics["critical_radius_sq"] = radius * radius;
    rec.metrics["R_empirical"] = curve;
  });
  return finish("complexity-curve", cfg, std::move(records));
}

RunReport run_experiment(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opts) {
  if (name == "select") return run_channel_selection_trials(cfg, opts);
  if (name == "calibrate-eps0") return run_calibrate_eps0(cfg, opts);
  if (name == "train") return run_training_run(cfg, opts);
  if (name == "risk-sweep") return run_risk_sweep(cfg, opts);
  if (name == "kernel-conv") return run_kernel_convergence(cfg, opts);
  if (name == "complexity-curve") return run_complexity_curve(cfg, opts);
  throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace sphattn
