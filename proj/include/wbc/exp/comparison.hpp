#pragma once

#include "wbc/exp/config_file.hpp"
#include "wbc/train/trainer.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace wbc::exp {

struct RunRecord {
  train::Method method = train::Method::wbc;
  Seed seed = 0;
  /// Rows produced before any failure.
  std::vector<train::ConsensusDiagnostics> rows;
  std::vector<policy::SoftmaxPolicy> policies;
  /// Empty on success.
  std::string error;
  /// Mean team reward of the zero-logit policies in this run's world.
  double untrained_reward = 0.0;
  /// Mean team reward over the last 10% of iterations (at least one).
  double final_reward = 0.0;
  double max_probe_tv = 0.0;
  int shared_modal = 0;

  bool ok() const { return error.empty(); }
};

struct MethodSummary {
  train::Method method = train::Method::wbc;
  double median_final_reward = 0.0;
  double iqr = 0.0;
  double D_final_median = 0.0;
  int runs = 0;
  int failed = 0;
};

struct ComparisonResult {
  /// Canonical order: spec.methods major, spec.seeds minor.
  std::vector<RunRecord> runs;
  std::vector<MethodSummary> summary;

  bool all_ok() const;
};

/// Reward of zero-logit policies averaged over `batches` rollout batches.
double untrained_reward(const env::WorldConfig& env, const train::TrainConfig& cfg, Seed seed, int batches = 10);

/// Mean of the last ceil(10%) rows' mean_team_reward.
double final_window_reward(const std::vector<train::ConsensusDiagnostics>& rows);

/// Linear-interpolation quantile; q in [0, 1]. Throws on empty input.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// Least-squares slope of log(max(D_t, floor)) against t.
double log_contraction_slope(const std::vector<train::ConsensusDiagnostics>& rows, double floor = 1e-12);

using RunCallback = std::function<void(const RunRecord&)>;

/// Trains every (method, seed) pair. Runs execute concurrently; a failing run
/// keeps its partial rows and the rest proceed. `on_done` is called once per
/// finished run, serialized, in completion order.
ComparisonResult run_comparison(const ExperimentSpec& spec, const RunCallback& on_done = {});

std::vector<MethodSummary> summarize(const std::vector<RunRecord>& runs, const std::vector<train::Method>& methods);

/// Trainer columns for every row of every run, in canonical order.
void write_metrics_csv(std::ostream& os, const ComparisonResult& result, int n_agents);
/// Columns: method, median_final_reward, iqr, D_final_median.
void write_summary_csv(std::ostream& os, const ComparisonResult& result);

/// metrics.csv, summary.csv, and per successful run policy_map_<method>_<seed>
/// (.csv, .svg; agent 0) and probe_probs_<method>_<seed>.csv in spec.output_dir.
void write_comparison_outputs(const ExperimentSpec& spec, const ComparisonResult& result);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Contraction, reward and alignment checks for the methods present in the
/// result; checks needing an absent method are skipped.
std::vector<CheckResult> comparison_checks(const ComparisonResult& result);

}  // namespace wbc::exp
