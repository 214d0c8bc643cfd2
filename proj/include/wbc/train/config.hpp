#pragma once

#include "wbc/common.hpp"
#include "wbc/ot/sinkhorn.hpp"
#include "wbc/policy/policy.hpp"

#include <string>
#include <string_view>

namespace wbc::train {

enum class Method { wbc, independent, kl_reg, param_share };

std::string_view method_name(Method m);
/// Throws std::invalid_argument on unknown names.
Method parse_method(std::string_view name);

enum class ScheduleMode { fixed, anneal };

struct TrainConfig {
  /// Visit-averaged gradients are the per-episode estimate divided by the
  /// horizon, so 50 is a unit step on the per-episode estimate at the default
  /// episode length.
  double alpha = 50.0;
  double lambda0 = 0.5;
  double epsilon0 = 0.1;
  double beta = 0.8;
  int p = 2;
  int batch_episodes = 8;
  int atoms_per_agent = 64;
  int iterations = 300;

  ScheduleMode schedule = ScheduleMode::fixed;
  double lambda_min = 0.1;
  double epsilon_min = 0.05;
  /// Fraction of the run over which the anneal schedule moves.
  double anneal_fraction = 0.5;

  Seed seed = 0;
  bool use_sliced_for_diagnostics = false;
  int sliced_projections = 64;

  /// Per-row norm cap on the combined gradient before the step.
  double grad_clip = 10.0;
  double sinkhorn_tol = 1e-6;
  int sinkhorn_max_iters = 2000;

  /// PPO-style clipped surrogate for the reward term (all methods alike).
  bool clipped_surrogate = false;
  double clip_ratio = 0.2;
  int surrogate_epochs = 4;

  /// wall_ms is reported as 0 unless set, keeping CSVs reproducible.
  bool record_wall_time = false;

  policy::ObsDiscretizer discretizer{};

  void validate() const;

  /// Sinkhorn settings for a given regularization level.
  ot::SinkhornConfig sinkhorn(double epsilon) const;
};

struct ScheduleValues {
  double lambda;
  double epsilon;
};

/// fixed: (lambda0, epsilon0). anneal: lambda linear and epsilon geometric
/// from their initial to minimum values over the first anneal_fraction of the
/// run, then constant.
ScheduleValues schedule_step(const TrainConfig& cfg, int iteration);

}  // namespace wbc::train
