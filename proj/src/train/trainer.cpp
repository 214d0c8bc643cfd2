#include "wbc/train/trainer.hpp"

#include "step.hpp"

#include "wbc/ot/barycenter.hpp"
#include "wbc/ot/sliced.hpp"
#include "wbc/train/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

#include <fmt/format.h>

namespace wbc::train {

namespace {

double sliced_divergence(const ot::DiscreteMeasure& x, const ot::DiscreteMeasure& y, const TrainConfig& cfg,
                         int iteration) {
  return ot::sliced_wasserstein(x, y, cfg.sliced_projections, cfg.p, cfg.seed + static_cast<Seed>(iteration));
}

}  // namespace

namespace detail {

void update_agents(std::vector<SoftmaxPolicy>& policies, const VisitationBatch& batch, const TrainConfig& cfg,
                   double lambda, const PenaltyFn& penalty) {
  std::vector<Matrix> behaviour;
  if (cfg.clipped_surrogate) {
    for (std::size_t i = 0; i < policies.size(); ++i) behaviour.push_back(visit_probs(batch.agents[i], policies[i]));
  }
  const int epochs = cfg.clipped_surrogate ? cfg.surrogate_epochs : 1;
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i = 0; i < policies.size(); ++i) {
      auto& pi = policies[i];
      PolicyGradient g = cfg.clipped_surrogate ? surrogate_gradient(batch.agents[i], pi, behaviour[i], cfg.clip_ratio)
                                               : reward_gradient(batch.agents[i], pi);
      if (lambda != 0.0 && penalty) g -= lambda * penalty(i, pi);
      clip_rows(g, cfg.grad_clip);
      pi.logits() += cfg.alpha * g;
    }
  }
}

StepContext begin_step(const std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                       const TrainConfig& cfg, int iteration, std::mt19937_64& rng) {
  StepContext ctx;
  ctx.start = std::chrono::steady_clock::now();
  ctx.sched = schedule_step(cfg, iteration);
  ctx.batch = collect_rollouts(policies, env, cfg, rng);
  ctx.snap = consensus_snapshot(ctx.batch, cfg, ctx.sched.epsilon);
  if (cfg.use_sliced_for_diagnostics) {
    const auto n = ctx.batch.agents.size();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        d = std::max(d, sliced_divergence(ctx.batch.agents[i].measure, ctx.batch.agents[j].measure, cfg, iteration));
      }
      ctx.snap.div_to_bary[i] = sliced_divergence(ctx.batch.agents[i].measure, ctx.snap.barycenter, cfg, iteration);
    }
    ctx.snap.D_t = d;
  }
  return ctx;
}

ConsensusDiagnostics finish_step(const StepContext& ctx, Method method, const TrainConfig& cfg, int iteration) {
  ConsensusDiagnostics d;
  d.iteration = iteration;
  d.seed = cfg.seed;
  d.method = method;
  d.D_t = ctx.snap.D_t;
  d.div_to_bary = ctx.snap.div_to_bary;
  d.mean_team_reward = ctx.batch.mean_team_reward;
  d.lambda_t = ctx.sched.lambda;
  d.epsilon_t = ctx.sched.epsilon;
  d.bary_residual = ctx.snap.residual;
  d.bary_iterations = ctx.snap.iterations;
  d.bary_mass = ctx.snap.barycenter.weights().sum();
  if (cfg.record_wall_time) {
    d.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - ctx.start).count();
  }
  return d;
}

}  // namespace

ConsensusSnapshot consensus_snapshot(const VisitationBatch& batch, const TrainConfig& cfg, double epsilon) {
  std::vector<ot::DiscreteMeasure> measures;
  measures.reserve(batch.agents.size());
  for (const auto& a : batch.agents) measures.push_back(a.measure);

  const auto scfg = cfg.sinkhorn(epsilon);
  const Matrix support = ot::pooled_support(measures);
  auto bary = ot::sinkhorn_barycenter(measures, support, scfg, cfg.beta);

  ConsensusSnapshot snap;
  snap.residual = bary.marginal_residual;
  snap.iterations = bary.iterations_used;
  snap.barycenter = std::move(bary.measure);
  for (const auto& a : batch.agents) snap.to_bary.push_back(consensus_atom_costs(a, snap.barycenter, scfg, cfg.beta));
  if (!cfg.use_sliced_for_diagnostics) {
    std::vector<double> self;
    snap.D_t = ot::max_pairwise(ot::pairwise_divergence_matrix(measures, scfg, cfg.beta, &self));
    const double self_bary = ot::self_transport(snap.barycenter, scfg, cfg.beta);
    for (std::size_t i = 0; i < measures.size(); ++i) {
      snap.div_to_bary.push_back(snap.to_bary[i].entropic_objective - 0.5 * (self[i] + self_bary));
    }
  } else {
    snap.div_to_bary.assign(measures.size(), 0.0);
  }
  return snap;
}

ConsensusDiagnostics wbc_step(std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                              const TrainConfig& cfg, int iteration, std::mt19937_64& rng) {
  auto ctx = detail::begin_step(policies, env, cfg, iteration, rng);
  detail::update_agents(policies, ctx.batch, cfg, ctx.sched.lambda, [&](std::size_t i, const SoftmaxPolicy& pi) {
    return consensus_gradient(ctx.batch.agents[i], ctx.snap.to_bary[i], pi);
  });
  return detail::finish_step(ctx, Method::wbc, cfg, iteration);
}

ConsensusDiagnostics method_step(Method method, std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                                 const TrainConfig& cfg, int iteration, std::mt19937_64& rng) {
  switch (method) {
    case Method::wbc: return wbc_step(policies, env, cfg, iteration, rng);
    case Method::independent: return independent_step(policies, env, cfg, iteration, rng);
    case Method::kl_reg: return kl_consensus_step(policies, env, cfg, iteration, rng);
    case Method::param_share: {
      if (policies.empty()) throw std::invalid_argument("method_step: no policies");
      SoftmaxPolicy shared = policies.front();
      auto d = shared_params_step(shared, env, cfg, iteration, rng);
      for (auto& pi : policies) pi.logits() = shared.logits();
      return d;
    }
  }
  throw std::invalid_argument("method_step: unknown method");
}

std::vector<SoftmaxPolicy> initial_policies(const env::WorldConfig& env, const TrainConfig& cfg) {
  std::vector<SoftmaxPolicy> out;
  for (int i = 0; i < env.n_agents; ++i) out.emplace_back(cfg.discretizer.n_cells(), i);
  return out;
}

env::WorldConfig world_for_seed(env::WorldConfig env, Seed seed) {
  env.target_seed = seed;
  return env;
}

TrainingRun run_training(Method method, env::WorldConfig env, const TrainConfig& cfg, const DiagnosticsSink& sink) {
  cfg.validate();
  env = world_for_seed(env, cfg.seed);
  env.validate();
  TrainingRun run;
  run.policies = initial_policies(env, cfg);
  std::mt19937_64 rng(cfg.seed);
  for (int t = 0; t < cfg.iterations; ++t) {
    run.diagnostics.push_back(method_step(method, run.policies, env, cfg, t, rng));
    if (sink) sink(run.diagnostics.back());
  }
  return run;
}

void write_diagnostics_header(std::ostream& os, int n_agents) {
  os << "iteration,seed,method,D_t";
  for (int i = 0; i < n_agents; ++i) os << ",div_to_bary_agent_" << i;
  os << ",mean_team_reward,lambda_t,epsilon_t,bary_residual,wall_ms\n";
}

void write_diagnostics_row(std::ostream& os, const ConsensusDiagnostics& d) {
  os << fmt::format("{},{},{},{:.17g}", d.iteration, d.seed, method_name(d.method), d.D_t);
  for (double x : d.div_to_bary) os << fmt::format(",{:.17g}", x);
  os << fmt::format(",{:.17g},{:.17g},{:.17g},{:.17g},{:.3f}\n", d.mean_team_reward, d.lambda_t, d.epsilon_t,
                    d.bary_residual, d.wall_ms);
}

}  // namespace wbc::train
