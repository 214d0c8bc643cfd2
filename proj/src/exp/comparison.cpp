#include "wbc/exp/comparison.hpp"

#include "wbc/exp/policy_map.hpp"
#include "wbc/exp/probes.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>

#include <fmt/format.h>
#include <omp.h>

namespace wbc::exp {

bool ComparisonResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.ok(); });
}

double untrained_reward(const env::WorldConfig& env, const train::TrainConfig& cfg, Seed seed, int batches) {
  const auto world = train::world_for_seed(env, seed);
  const auto policies = train::initial_policies(world, cfg);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  double total = 0.0;
  for (int b = 0; b < batches; ++b) total += train::collect_rollouts(policies, world, cfg, rng).mean_team_reward;
  return total / batches;
}

double final_window_reward(const std::vector<train::ConsensusDiagnostics>& rows) {
  if (rows.empty()) return 0.0;
  const auto n = rows.size();
  const auto window = std::max<std::size_t>(1, (n + 9) / 10);
  double total = 0.0;
  for (std::size_t k = n - window; k < n; ++k) total += rows[k].mean_team_reward;
  return total / static_cast<double>(window);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double log_contraction_slope(const std::vector<train::ConsensusDiagnostics>& rows, double floor) {
  if (rows.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = r.iteration;
    const double y = std::log(std::max(r.D_t, floor));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<MethodSummary> summarize(const std::vector<RunRecord>& runs, const std::vector<train::Method>& methods) {
  std::vector<MethodSummary> out;
  for (auto m : methods) {
    MethodSummary s;
    s.method = m;
    std::vector<double> finals, d_final;
    for (const auto& r : runs) {
      if (r.method != m) continue;
      ++s.runs;
      if (!r.ok()) {
        ++s.failed;
        continue;
      }
      finals.push_back(r.final_reward);
      d_final.push_back(r.rows.back().D_t);
    }
    if (!finals.empty()) {
      s.median_final_reward = median(finals);
      s.iqr = quantile(finals, 0.75) - quantile(finals, 0.25);
      s.D_final_median = median(d_final);
    } else {
      s.median_final_reward = s.iqr = s.D_final_median = std::nan("");
    }
    out.push_back(s);
  }
  return out;
}

ComparisonResult run_comparison(const ExperimentSpec& spec, const RunCallback& on_done) {
  spec.validate();
  ComparisonResult result;
  for (auto m : spec.methods) {
    for (auto s : spec.seeds) {
      RunRecord r;
      r.method = m;
      r.seed = s;
      result.runs.push_back(std::move(r));
    }
  }

  std::mutex done_mutex;
  const int n_runs = static_cast<int>(result.runs.size());
  const int threads = spec.threads > 0 ? spec.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int k = 0; k < n_runs; ++k) {
    auto& rec = result.runs[static_cast<std::size_t>(k)];
    auto cfg = spec.train;
    cfg.seed = rec.seed;
    try {
      auto run = train::run_training(rec.method, spec.env, cfg,
                                     [&](const train::ConsensusDiagnostics& d) { rec.rows.push_back(d); });
      rec.policies = std::move(run.policies);
      const auto world = train::world_for_seed(spec.env, rec.seed);
      rec.untrained_reward = untrained_reward(spec.env, cfg, rec.seed);
      rec.final_reward = final_window_reward(rec.rows);
      rec.max_probe_tv = max_pairwise_tv(rec.policies, spec.probe_states, world, cfg.discretizer);
      rec.shared_modal = shared_modal_count(rec.policies, spec.probe_states, world, cfg.discretizer);
    } catch (const std::exception& e) {
      rec.error = e.what();
      if (rec.error.empty()) rec.error = "unknown failure";
    }
    if (on_done) {
      std::lock_guard lock(done_mutex);
      on_done(rec);
    }
  }
  result.summary = summarize(result.runs, spec.methods);
  return result;
}

void write_metrics_csv(std::ostream& os, const ComparisonResult& result, int n_agents) {
  train::write_diagnostics_header(os, n_agents);
  for (const auto& r : result.runs) {
    for (const auto& d : r.rows) train::write_diagnostics_row(os, d);
  }
}

void write_summary_csv(std::ostream& os, const ComparisonResult& result) {
  os << "method,median_final_reward,iqr,D_final_median\n";
  for (const auto& s : result.summary) {
    os << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", train::method_name(s.method), s.median_final_reward, s.iqr,
                      s.D_final_median);
  }
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

void write_comparison_outputs(const ExperimentSpec& spec, const ComparisonResult& result) {
  const auto& dir = spec.output_dir;
  std::filesystem::create_directories(dir);
  {
    auto out = open_output(dir / "metrics.csv");
    write_metrics_csv(out, result, spec.env.n_agents);
  }
  {
    auto out = open_output(dir / "summary.csv");
    write_summary_csv(out, result);
  }
  for (const auto& r : result.runs) {
    if (!r.ok()) continue;
    const auto stem = fmt::format("{}_{}", train::method_name(r.method), r.seed);
    const auto world = train::world_for_seed(spec.env, r.seed);
    const auto map = compute_policy_map(r.policies.front(), 0, world, spec.train.discretizer, spec.map_resolution,
                                        map_context(spec.env, r.seed));
    {
      auto out = open_output(dir / fmt::format("policy_map_{}.csv", stem));
      write_policy_map_csv(out, map);
    }
    {
      auto out = open_output(dir / fmt::format("policy_map_{}.svg", stem));
      write_policy_map_svg(out, map, world);
    }
    auto out = open_output(dir / fmt::format("probe_probs_{}.csv", stem));
    write_probe_csv(out, r.policies, spec.probe_states, world, spec.train.discretizer);
  }
}

std::vector<CheckResult> comparison_checks(const ComparisonResult& result) {
  std::vector<CheckResult> out;
  auto runs_of = [&](train::Method m) {
    std::vector<const RunRecord*> rs;
    for (const auto& r : result.runs) {
      if (r.method == m && r.ok()) rs.push_back(&r);
    }
    return rs;
  };
  const auto wbc = runs_of(train::Method::wbc);
  const auto ind = runs_of(train::Method::independent);
  const auto kl = runs_of(train::Method::kl_reg);

  if (!wbc.empty()) {
    std::vector<double> ratios;
    int negative = 0;
    for (const auto* r : wbc) {
      ratios.push_back(r->rows.back().D_t / r->rows.front().D_t);
      if (log_contraction_slope(r->rows) < 0.0) ++negative;
    }
    const double med = median(ratios);
    const int needed = static_cast<int>(std::ceil(0.8 * static_cast<double>(wbc.size())));
    out.push_back({"contraction", med < 0.5 && negative >= needed,
                   fmt::format("median D_final/D_0 = {:.4f} (< 0.5), negative log-slope on {}/{} seeds (>= {})", med,
                               negative, wbc.size(), needed)});
  }

  auto median_of = [](const std::vector<const RunRecord*>& rs, auto field) {
    std::vector<double> v;
    for (const auto* r : rs) v.push_back(field(*r));
    return median(v);
  };
  auto final_of = [](const RunRecord& r) { return r.final_reward; };
  if (!wbc.empty() && !ind.empty()) {
    std::vector<const RunRecord*> all = wbc;
    all.insert(all.end(), ind.begin(), ind.end());
    const double base = median_of(all, [](const RunRecord& r) { return r.untrained_reward; });
    const double gain_wbc = median_of(wbc, final_of) - base;
    const double gain_ind = median_of(ind, final_of) - base;
    out.push_back({"reward_vs_independent", gain_ind > 0.0 ? gain_wbc >= 1.3 * gain_ind : gain_wbc > 0.0,
                   fmt::format("improvement over untrained: wbc {:.4f}, independent {:.4f}, ratio {:.4f} (>= 1.3)",
                               gain_wbc, gain_ind, gain_wbc / gain_ind)});
  }
  if (!wbc.empty() && !kl.empty()) {
    const double rw = median_of(wbc, final_of);
    const double rk = median_of(kl, final_of);
    out.push_back({"reward_vs_kl", rw > rk, fmt::format("median final reward: wbc {:.4f}, kl_reg {:.4f}", rw, rk)});
  }
  if (!wbc.empty()) {
    const double tv_wbc = median_of(wbc, [](const RunRecord& r) { return r.max_probe_tv; });
    bool pass = tv_wbc <= 0.15;
    std::string detail = fmt::format("median max TV: wbc {:.4f} (<= 0.15)", tv_wbc);
    if (!ind.empty()) {
      const double tv_ind = median_of(ind, [](const RunRecord& r) { return r.max_probe_tv; });
      pass = pass && tv_ind >= 2.0 * tv_wbc;
      detail += fmt::format(", independent {:.4f} (>= 2x wbc)", tv_ind);
    }
    out.push_back({"alignment", pass, detail});
  }
  return out;
}

}  // namespace wbc::exp
