#pragma once

#include "wbc/env/nav.hpp"
#include "wbc/train/config.hpp"
#include "wbc/train/gradients.hpp"
#include "wbc/train/rollout.hpp"

#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

namespace wbc::train {

struct ConsensusDiagnostics {
  int iteration = 0;
  Seed seed = 0;
  Method method = Method::wbc;
  /// Max pairwise divergence between the agents' visitation measures.
  double D_t = 0.0;
  std::vector<double> div_to_bary;
  double mean_team_reward = 0.0;
  double lambda_t = 0.0;
  double epsilon_t = 0.0;
  double bary_residual = 0.0;
  int bary_iterations = 0;
  /// Total barycenter weight; not part of the CSV.
  double bary_mass = 0.0;
  double wall_ms = 0.0;
};

/// Barycenter and divergences of one batch, shared by every method.
struct ConsensusSnapshot {
  ot::DiscreteMeasure barycenter;
  double D_t = 0.0;
  std::vector<double> div_to_bary;
  /// Transport from each agent's measure to the barycenter.
  std::vector<AtomCosts> to_bary;
  double residual = 0.0;
  int iterations = 0;
};
ConsensusSnapshot consensus_snapshot(const VisitationBatch& batch, const TrainConfig& cfg, double epsilon);

/// One iteration of `method`: collect, barycenter on the pooled support, update
/// every policy in place, report diagnostics. For param_share all entries of
/// `policies` are copies of one table and stay identical.
ConsensusDiagnostics method_step(Method method, std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                                 const TrainConfig& cfg, int iteration, std::mt19937_64& rng);

/// theta_i += alpha (grad R - lambda_t grad W(mu_i, barycenter)).
ConsensusDiagnostics wbc_step(std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env,
                              const TrainConfig& cfg, int iteration, std::mt19937_64& rng);

std::vector<SoftmaxPolicy> initial_policies(const env::WorldConfig& env, const TrainConfig& cfg);

struct TrainingRun {
  std::vector<ConsensusDiagnostics> diagnostics;
  std::vector<SoftmaxPolicy> policies;
};

using DiagnosticsSink = std::function<void(const ConsensusDiagnostics&)>;

/// cfg.iterations steps from zero logits with one generator seeded by cfg.seed.
/// The target layout is tied to the seed as well. Each row is handed to `sink`
/// as soon as it exists, so a failing run still leaves its earlier rows behind.
TrainingRun run_training(Method method, env::WorldConfig env, const TrainConfig& cfg,
                         const DiagnosticsSink& sink = {});

/// The world a run with this seed trains in.
env::WorldConfig world_for_seed(env::WorldConfig env, Seed seed);

void write_diagnostics_header(std::ostream& os, int n_agents);
void write_diagnostics_row(std::ostream& os, const ConsensusDiagnostics& d);

}  // namespace wbc::train
