#pragma once

// Pieces of one training iteration shared by every method.

#include "wbc/train/trainer.hpp"

#include <chrono>
#include <functional>

namespace wbc::train::detail {

// Penalty gradient of agent i at the policy's current logits.
using PenaltyFn = std::function<PolicyGradient(std::size_t agent, const SoftmaxPolicy& policy)>;

// theta += alpha * clip(g_R - lambda g_C), once, or once per surrogate epoch.
void update_agents(std::vector<SoftmaxPolicy>& policies, const VisitationBatch& batch, const TrainConfig& cfg,
                   double lambda, const PenaltyFn& penalty);

struct StepContext {
  ScheduleValues sched;
  VisitationBatch batch;
  ConsensusSnapshot snap;
  std::chrono::steady_clock::time_point start;
};

// Rollouts plus the barycenter and divergence diagnostics.
StepContext begin_step(const std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                       const TrainConfig& cfg, int iteration, std::mt19937_64& rng);

ConsensusDiagnostics finish_step(const StepContext& ctx, Method method, const TrainConfig& cfg, int iteration);

}  // namespace wbc::train::detail
