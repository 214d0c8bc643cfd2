#pragma once

#include "wbc/ot/sinkhorn.hpp"
#include "wbc/train/rollout.hpp"

namespace wbc::train {

using policy::PolicyGradient;

/// REINFORCE with the agent's batch-mean reward-to-go at the same step as
/// baseline: mean over visits of (G_t - mean_t G) * grad log pi(a | cell).
PolicyGradient reward_gradient(const AgentBatch& batch, const SoftmaxPolicy& policy);

/// Clipped-surrogate variant of reward_gradient at the current logits, with
/// `old_probs` (one row per visit, in visit order) fixing the behaviour policy.
PolicyGradient surrogate_gradient(const AgentBatch& batch, const SoftmaxPolicy& policy, const Matrix& old_probs,
                                  double clip_ratio);

/// Behaviour probabilities pi(. | cell) for every visit of the batch.
Matrix visit_probs(const AgentBatch& batch, const SoftmaxPolicy& policy);

/// Transported cost mass per atom, sum_j gamma_kj D_kj, for the entropic plan
/// from the batch measure to `target`; index k follows batch.atoms.
struct AtomCosts {
  Vector mass;
  /// <gamma, D> of the plan.
  double cost = 0.0;
  /// Cost plus the entropic term.
  double entropic_objective = 0.0;
};
AtomCosts consensus_atom_costs(const AgentBatch& batch, const ot::DiscreteMeasure& target,
                               const ot::SinkhornConfig& cfg, double beta);

/// sum_k mass_k * grad log pi(a_k | cell_k) at the current logits.
PolicyGradient consensus_gradient(const AgentBatch& batch, const AtomCosts& costs, const SoftmaxPolicy& policy);

/// Coupling-frozen gradient of the entropic transport cost from the agent's
/// visitation measure to `target`.
PolicyGradient consensus_gradient(const AgentBatch& batch, const ot::DiscreteMeasure& target,
                                  const SoftmaxPolicy& policy, const ot::SinkhornConfig& cfg, double beta);

/// Rescales every row whose Euclidean norm exceeds `max_norm` down to it.
void clip_rows(PolicyGradient& grad, double max_norm);

}  // namespace wbc::train
