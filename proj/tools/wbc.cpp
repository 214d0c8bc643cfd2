// wbc: run method comparisons, the sample-size sweep, or a single training run.
//
//   wbc compare --config exp.cfg --set iterations=100 --check
//   wbc sweep --sweep_replicates 10
//   wbc train --method wbc --seed 3 --output_dir out
//   wbc keys
//
// Settings are applied in order: defaults, --config file, per-key flags, --set.
// Exit codes: 0 ok, 1 config error, 2 run failure, 3 --check failure.

#include "wbc/exp/comparison.hpp"
#include "wbc/exp/config_file.hpp"
#include "wbc/exp/fast_rate.hpp"
#include "wbc/exp/policy_map.hpp"
#include "wbc/exp/probes.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <fmt/format.h>

namespace {

using namespace wbc;

enum Exit { kOk = 0, kConfig = 1, kRun = 2, kCheck = 3 };

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  bool check = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_check) {
  cmd->add_option("--config", args.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", args.sets, "override as key=value (repeatable)");
  if (with_check) cmd->add_flag("--check", args.check, "exit 3 unless the result checks pass");
  for (const auto& key : exp::config_keys()) {
    cmd->add_option("--" + key.name, args.flags[key.name], key.help)->group("Config keys");
  }
}

exp::ExperimentSpec build_spec(const CommonArgs& args) {
  auto spec = args.config.empty() ? exp::parse_config_text("") : exp::parse_config_file(args.config);
  std::vector<std::string> assignments;
  for (const auto& key : exp::config_keys()) {
    const auto it = args.flags.find(key.name);
    if (it != args.flags.end() && !it->second.empty()) assignments.push_back(key.name + "=" + it->second);
  }
  assignments.insert(assignments.end(), args.sets.begin(), args.sets.end());
  exp::apply_overrides(spec, assignments);
  return spec;
}

int print_checks(const std::vector<exp::CheckResult>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    fmt::print("{} {}: {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    ok = ok && c.passed;
  }
  return ok ? kOk : kCheck;
}

int cmd_compare(const exp::ExperimentSpec& spec, bool check) {
  const auto result = exp::run_comparison(spec, [](const exp::RunRecord& r) {
    if (r.ok()) {
      fmt::print(stderr, "{} seed {}: final reward {:.3f} (untrained {:.3f}), D {:.4g} -> {:.4g}, probe TV {:.3f}\n",
                 train::method_name(r.method), r.seed, r.final_reward, r.untrained_reward, r.rows.front().D_t,
                 r.rows.back().D_t, r.max_probe_tv);
    } else {
      fmt::print(stderr, "{} seed {}: FAILED after {} iterations: {}\n", train::method_name(r.method), r.seed,
                 r.rows.size(), r.error);
    }
  });
  exp::write_comparison_outputs(spec, result);
  exp::write_summary_csv(std::cout, result);
  if (!result.all_ok()) return kRun;
  return check ? print_checks(exp::comparison_checks(result)) : kOk;
}

int cmd_sweep(const exp::ExperimentSpec& spec, bool check) {
  const auto sweep = spec.sweep.value_or(exp::SweepSpec{});
  const auto result = exp::run_fast_rate_sweep(sweep);
  std::filesystem::create_directories(spec.output_dir);
  std::ofstream out(spec.output_dir / "fastrate.csv");
  exp::write_fastrate_csv(out, result);
  exp::write_fastrate_csv(std::cout, result);
  fmt::print("slope {:.4f}\n", result.slope);
  if (!check) return kOk;
  int inversions = 0;
  for (std::size_t k = 1; k < result.points.size(); ++k) {
    if (result.points[k].mean_error > result.points[k - 1].mean_error) ++inversions;
  }
  return print_checks({
      {"sweep_slope", result.slope >= -1.5 && result.slope <= -0.5,
       fmt::format("slope {:.4f} in [-1.5, -0.5]", result.slope)},
      {"sweep_monotone", inversions <= 1, fmt::format("{} inversions (<= 1)", inversions)},
  });
}

int cmd_train(exp::ExperimentSpec spec, const std::string& method_name, std::uint64_t seed) {
  const auto method = train::parse_method(method_name);
  auto cfg = spec.train;
  cfg.seed = seed;
  std::filesystem::create_directories(spec.output_dir);
  std::ofstream metrics(spec.output_dir / "metrics.csv");
  train::write_diagnostics_header(metrics, spec.env.n_agents);
  train::TrainingRun run;
  try {
    run = train::run_training(method, spec.env, cfg,
                              [&](const train::ConsensusDiagnostics& d) { train::write_diagnostics_row(metrics, d); });
  } catch (const std::exception& e) {
    fmt::print(stderr, "run failed: {}\n", e.what());
    return kRun;
  }
  const auto world = train::world_for_seed(spec.env, seed);
  const auto stem = fmt::format("{}_{}", method_name, seed);
  for (const auto& pi : run.policies) {
    std::ofstream out(spec.output_dir / fmt::format("policy_{}_agent_{}.csv", stem, pi.agent_id()));
    pi.write_csv(out);
  }
  const auto map = exp::compute_policy_map(run.policies.front(), 0, world, cfg.discretizer, spec.map_resolution,
                                           exp::map_context(spec.env, seed));
  std::ofstream map_csv(spec.output_dir / fmt::format("policy_map_{}.csv", stem));
  exp::write_policy_map_csv(map_csv, map);
  std::ofstream map_svg(spec.output_dir / fmt::format("policy_map_{}.svg", stem));
  exp::write_policy_map_svg(map_svg, map, world);
  std::ofstream probes(spec.output_dir / fmt::format("probe_probs_{}.csv", stem));
  exp::write_probe_csv(probes, run.policies, spec.probe_states, world, cfg.discretizer);
  fmt::print("final reward {:.4f}, D {:.4g} -> {:.4g}, probe TV {:.4f}, map toward target {:.3f}\n",
             exp::final_window_reward(run.diagnostics), run.diagnostics.front().D_t, run.diagnostics.back().D_t,
             exp::max_pairwise_tv(run.policies, spec.probe_states, world, cfg.discretizer),
             exp::fraction_toward_target(map, world));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus policy training experiments"};
  app.require_subcommand(1);

  CommonArgs compare_args, sweep_args, train_args;
  auto* compare = app.add_subcommand("compare", "train every (method, seed) pair and summarize");
  add_common(compare, compare_args, true);
  auto* sweep = app.add_subcommand("sweep", "barycenter error against sample size");
  add_common(sweep, sweep_args, true);
  auto* train_cmd = app.add_subcommand("train", "one training run with policy dumps");
  add_common(train_cmd, train_args, false);
  std::string method = "wbc";
  std::uint64_t seed = 0;
  train_cmd->add_option("--method", method, "wbc, independent, kl_reg or param_share");
  train_cmd->add_option("--seed", seed, "run seed");
  auto* keys = app.add_subcommand("keys", "list config keys with defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*keys) {
      for (const auto& k : exp::config_keys()) fmt::print("{:<28} {:<24} {}\n", k.name, k.default_value, k.help);
      return kOk;
    }
    if (*compare) return cmd_compare(build_spec(compare_args), compare_args.check);
    if (*sweep) return cmd_sweep(build_spec(sweep_args), sweep_args.check);
    if (*train_cmd) return cmd_train(build_spec(train_args), method, seed);
  } catch (const exp::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "run failed: {}\n", e.what());
    return kRun;
  }
  return kOk;
}
