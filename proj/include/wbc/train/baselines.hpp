#pragma once

#include "wbc/train/trainer.hpp"

namespace wbc::train {

/// Policy-gradient step with no coupling between agents.
ConsensusDiagnostics independent_step(std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                                      const TrainConfig& cfg, int iteration, std::mt19937_64& rng);

/// Penalty lambda_t * mean over visited cells of KL(pi_i || mixture of all
/// current policies).
ConsensusDiagnostics kl_consensus_step(std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                                       const TrainConfig& cfg, int iteration, std::mt19937_64& rng);

/// One table driving every agent; the per-agent reward gradients are averaged.
ConsensusDiagnostics shared_params_step(SoftmaxPolicy& shared, const env::WorldConfig& env, const TrainConfig& cfg,
                                        int iteration, std::mt19937_64& rng);

/// Uniform mixture of the agents' action distributions, one row per cell.
Matrix mixture_reference(const std::vector<SoftmaxPolicy>& policies);

}  // namespace wbc::train
