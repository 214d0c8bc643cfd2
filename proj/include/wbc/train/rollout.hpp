#pragma once

#include "wbc/env/nav.hpp"
#include "wbc/ot/measure.hpp"
#include "wbc/policy/policy.hpp"
#include "wbc/train/config.hpp"

#include <random>
#include <vector>

namespace wbc::train {

using policy::CellId;
using policy::SoftmaxPolicy;

/// One (observation cell, action) decision of one agent.
struct Visit {
  CellId cell;
  ot::Action action;
  /// Position relative to the agent's own target when the action was taken;
  /// this is the state half of the visit's embedding.
  Eigen::Vector2d state;
  /// Undiscounted reward-to-go within the episode.
  double reward_to_go;
  /// Time step within the episode.
  int step = 0;
};

struct AgentBatch {
  std::vector<Visit> visits;
  /// Indices into `visits` of the atoms forming the visitation measure.
  std::vector<std::size_t> atoms;
  /// Uniform measure over embed_state_action(visit.state, visit.action) of the atoms.
  ot::DiscreteMeasure measure;
};

struct VisitationBatch {
  std::vector<AgentBatch> agents;
  /// Mean over episodes of the summed per-step rewards of all agents.
  double mean_team_reward = 0.0;
  int episodes = 0;
};

/// Runs cfg.batch_episodes episodes with every agent sampling from its own
/// policy, then draws cfg.atoms_per_agent visits per agent uniformly without
/// replacement (with replacement when fewer were made). Each episode's start
/// layout is seeded from `rng`, which is also the source of all action and
/// subsampling draws. Optional `trajectory` receives every step.
VisitationBatch collect_rollouts(const std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env_cfg,
                                 const TrainConfig& cfg, std::mt19937_64& rng,
                                 std::vector<env::TrajectoryRow>* trajectory = nullptr);

}  // namespace wbc::train
