#include "wbc/train/gradients.hpp"

#include <algorithm>

namespace wbc::train {

namespace {

// Mean return-to-go of the batch at every time step. Returns within a finite
// episode shrink with time, so a single mean would mostly encode the step.
std::vector<double> step_baseline(const AgentBatch& batch) {
  int horizon = 0;
  for (const auto& v : batch.visits) horizon = std::max(horizon, v.step + 1);
  std::vector<double> sum(static_cast<std::size_t>(horizon), 0.0);
  std::vector<int> count(static_cast<std::size_t>(horizon), 0);
  for (const auto& v : batch.visits) {
    sum[static_cast<std::size_t>(v.step)] += v.reward_to_go;
    ++count[static_cast<std::size_t>(v.step)];
  }
  for (std::size_t t = 0; t < sum.size(); ++t) {
    if (count[t] > 0) sum[t] /= count[t];
  }
  return sum;
}

}  // namespace

PolicyGradient reward_gradient(const AgentBatch& batch, const SoftmaxPolicy& policy) {
  if (batch.visits.empty()) throw std::invalid_argument("reward_gradient: empty batch");
  PolicyGradient g = policy.zero_gradient();
  const auto baseline = step_baseline(batch);
  const double w = 1.0 / static_cast<double>(batch.visits.size());
  for (const auto& v : batch.visits) {
    const double adv = v.reward_to_go - baseline[static_cast<std::size_t>(v.step)];
    if (adv != 0.0) policy.accumulate_log_prob_grad(g, v.cell, v.action, w * adv);
  }
  return g;
}

Matrix visit_probs(const AgentBatch& batch, const SoftmaxPolicy& policy) {
  Matrix out(static_cast<Eigen::Index>(batch.visits.size()), ot::kNumActions);
  for (std::size_t k = 0; k < batch.visits.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = policy.action_probs(batch.visits[k].cell).transpose();
  }
  return out;
}

PolicyGradient surrogate_gradient(const AgentBatch& batch, const SoftmaxPolicy& policy, const Matrix& old_probs,
                                  double clip_ratio) {
  if (batch.visits.empty()) throw std::invalid_argument("surrogate_gradient: empty batch");
  if (old_probs.rows() != static_cast<Eigen::Index>(batch.visits.size())) {
    throw std::invalid_argument("surrogate_gradient: one behaviour row per visit required");
  }
  PolicyGradient g = policy.zero_gradient();
  const auto baseline = step_baseline(batch);
  const double w = 1.0 / static_cast<double>(batch.visits.size());
  for (std::size_t k = 0; k < batch.visits.size(); ++k) {
    const auto& v = batch.visits[k];
    const int a = static_cast<int>(v.action);
    const double adv = v.reward_to_go - baseline[static_cast<std::size_t>(v.step)];
    const double ratio = policy.action_probs(v.cell)[a] / old_probs(static_cast<Eigen::Index>(k), a);
    // min(r A, clip(r) A) only has slope in r where the unclipped term is the active one.
    const bool clipped = (adv > 0.0 && ratio > 1.0 + clip_ratio) || (adv < 0.0 && ratio < 1.0 - clip_ratio);
    if (!clipped && adv != 0.0) policy.accumulate_log_prob_grad(g, v.cell, v.action, w * adv * ratio);
  }
  return g;
}

AtomCosts consensus_atom_costs(const AgentBatch& batch, const ot::DiscreteMeasure& target,
                               const ot::SinkhornConfig& cfg, double beta) {
  const auto solved = ot::sinkhorn_ot(batch.measure, target, cfg, beta);
  const auto cost = ot::cost_matrix(batch.measure, target, beta, cfg.p, cfg.exec);
  AtomCosts out;
  out.mass = (solved.plan.gamma.array() * cost.entries.array()).rowwise().sum();
  out.cost = solved.cost;
  out.entropic_objective = solved.entropic_objective;
  return out;
}

PolicyGradient consensus_gradient(const AgentBatch& batch, const AtomCosts& costs, const SoftmaxPolicy& policy) {
  if (costs.mass.size() != static_cast<Eigen::Index>(batch.atoms.size())) {
    throw std::invalid_argument("consensus_gradient: cost mass does not match the batch atoms");
  }
  PolicyGradient g = policy.zero_gradient();
  for (std::size_t k = 0; k < batch.atoms.size(); ++k) {
    const auto& v = batch.visits[batch.atoms[k]];
    policy.accumulate_log_prob_grad(g, v.cell, v.action, costs.mass[static_cast<Eigen::Index>(k)]);
  }
  return g;
}

PolicyGradient consensus_gradient(const AgentBatch& batch, const ot::DiscreteMeasure& target,
                                  const SoftmaxPolicy& policy, const ot::SinkhornConfig& cfg, double beta) {
  return consensus_gradient(batch, consensus_atom_costs(batch, target, cfg, beta), policy);
}

void clip_rows(PolicyGradient& grad, double max_norm) {
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    const double n = grad.row(r).norm();
    if (n > max_norm) grad.row(r) *= max_norm / n;
  }
}

}  // namespace wbc::train
