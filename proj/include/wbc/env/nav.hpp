#pragma once

#include "wbc/common.hpp"
#include "wbc/ot/measure.hpp"

#include <iosfwd>
#include <vector>

namespace wbc::env {

using ot::Action;
using Position = Eigen::Vector2d;

enum class TargetMode { fixed_per_seed, resampled_per_episode };

struct WorldConfig {
  int n_agents = 3;
  Eigen::Vector2d arena_min{0.0, 0.0};
  Eigen::Vector2d arena_max{1.0, 1.0};
  double step_size = 0.05;
  double collision_radius = 0.1;
  double collision_penalty = 1.0;
  int episode_length = 50;
  TargetMode target_mode = TargetMode::fixed_per_seed;
  /// Seed of the target layout in fixed_per_seed mode.
  Seed target_seed = 0;
  /// Targets are drawn from the arena shrunk by this margin on every side,
  /// so every agent can be found on all sides of its target.
  double target_margin = 0.25;

  void validate() const;
};

struct JointState {
  std::vector<Position> positions;
  std::vector<Position> targets;
  int step_index = 0;
};

struct StepResult {
  JointState state;
  std::vector<double> rewards;
  bool done = false;
};

/// Positions uniform in the arena with pairwise separation >= collision_radius
/// (rejection sampling, at most 1000 attempts per layout). Targets come from
/// cfg.target_seed or from `seed` depending on target_mode and are separated
/// by at least twice the collision radius.
JointState reset(const WorldConfig& cfg, Seed seed);

/// Simultaneous moves, clamped to the arena, then the post-move collision
/// check. reward_i = -||p_i - t_i|| - penalty * #{j != i : ||p_i - p_j|| < radius}.
StepResult step(const JointState& state, const std::vector<Action>& actions, const WorldConfig& cfg);

/// [p_i, t_i, p_j for j != i in index order].
Vector observe(const JointState& state, int agent, const WorldConfig& cfg);

inline int observation_dim(const WorldConfig& cfg) { return 2 + 2 + 2 * (cfg.n_agents - 1); }

/// One row of a trajectory dump.
struct TrajectoryRow {
  int episode;
  int step;
  int agent;
  Position position;
  Position target;
  Action action;
  double reward;
};

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows);

}  // namespace wbc::env
