#include "wbc/train/baselines.hpp"

#include "step.hpp"

#include <algorithm>

namespace wbc::train {

ConsensusDiagnostics independent_step(std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                                      const TrainConfig& cfg, int iteration, std::mt19937_64& rng) {
  auto ctx = detail::begin_step(policies, env, cfg, iteration, rng);
  detail::update_agents(policies, ctx.batch, cfg, 0.0, {});
  return detail::finish_step(ctx, Method::independent, cfg, iteration);
}

Matrix mixture_reference(const std::vector<SoftmaxPolicy>& policies) {
  if (policies.empty()) throw std::invalid_argument("mixture_reference: no policies");
  const int cells = policies.front().n_cells();
  Matrix ref = Matrix::Zero(cells, ot::kNumActions);
  const double w = 1.0 / static_cast<double>(policies.size());
  for (const auto& pi : policies) {
    if (pi.n_cells() != cells) throw std::invalid_argument("mixture_reference: policies differ in size");
    for (int c = 0; c < cells; ++c) ref.row(c) += w * pi.action_probs(c).transpose();
  }
  return ref;
}

ConsensusDiagnostics kl_consensus_step(std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                                       const TrainConfig& cfg, int iteration, std::mt19937_64& rng) {
  auto ctx = detail::begin_step(policies, env, cfg, iteration, rng);
  Matrix reference;
  std::vector<std::vector<CellId>> cells(policies.size());
  if (ctx.sched.lambda != 0.0) {
    reference = mixture_reference(policies);
    for (std::size_t i = 0; i < policies.size(); ++i) {
      for (const auto& v : ctx.batch.agents[i].visits) cells[i].push_back(v.cell);
      std::sort(cells[i].begin(), cells[i].end());
      cells[i].erase(std::unique(cells[i].begin(), cells[i].end()), cells[i].end());
    }
  }
  detail::update_agents(policies, ctx.batch, cfg, ctx.sched.lambda, [&](std::size_t i, const SoftmaxPolicy& pi) {
    return pi.kl_to_reference(reference, cells[i]).second;
  });
  return detail::finish_step(ctx, Method::kl_reg, cfg, iteration);
}

ConsensusDiagnostics shared_params_step(SoftmaxPolicy& shared, const env::WorldConfig& env, const TrainConfig& cfg,
                                        int iteration, std::mt19937_64& rng) {
  const std::vector<SoftmaxPolicy> copies(static_cast<std::size_t>(env.n_agents), shared);
  auto ctx = detail::begin_step(copies, env, cfg, iteration, rng);
  const auto n = ctx.batch.agents.size();
  std::vector<Matrix> behaviour;
  if (cfg.clipped_surrogate) {
    for (const auto& a : ctx.batch.agents) behaviour.push_back(visit_probs(a, shared));
  }
  const int epochs = cfg.clipped_surrogate ? cfg.surrogate_epochs : 1;
  for (int e = 0; e < epochs; ++e) {
    PolicyGradient g = shared.zero_gradient();
    for (std::size_t i = 0; i < n; ++i) {
      g += cfg.clipped_surrogate ? surrogate_gradient(ctx.batch.agents[i], shared, behaviour[i], cfg.clip_ratio)
                                 : reward_gradient(ctx.batch.agents[i], shared);
    }
    g /= static_cast<double>(n);
    clip_rows(g, cfg.grad_clip);
    shared.logits() += cfg.alpha * g;
  }
  return detail::finish_step(ctx, Method::param_share, cfg, iteration);
}

}  // namespace wbc::train
