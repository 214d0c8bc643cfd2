#include "wbc/train/rollout.hpp"

#include <numeric>

namespace wbc::train {

namespace {

std::vector<std::size_t> subsample(std::size_t available, int wanted, std::mt19937_64& rng) {
  const auto k = static_cast<std::size_t>(wanted);
  std::vector<std::size_t> out;
  out.reserve(k);
  if (available >= k) {
    // Partial Fisher-Yates: the first k slots are a uniform draw without replacement.
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, available - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, available - 1);
    for (std::size_t i = 0; i < k; ++i) out.push_back(pick(rng));
  }
  return out;
}

}  // namespace

VisitationBatch collect_rollouts(const std::vector<SoftmaxPolicy>& policies, const env::WorldConfig& env_cfg,
                                 const TrainConfig& cfg, std::mt19937_64& rng,
                                 std::vector<env::TrajectoryRow>* trajectory) {
  const auto n = static_cast<std::size_t>(env_cfg.n_agents);
  if (policies.size() != n) throw std::invalid_argument("collect_rollouts: one policy per agent required");
  if (cfg.batch_episodes < 1) throw std::invalid_argument("collect_rollouts: batch_episodes must be >= 1");

  VisitationBatch batch;
  batch.agents.resize(n);
  batch.episodes = cfg.batch_episodes;
  const auto horizon = static_cast<std::size_t>(env_cfg.episode_length);
  double team_total = 0.0;

  std::vector<ot::Action> actions(n);
  std::vector<CellId> cells(n);
  for (int ep = 0; ep < cfg.batch_episodes; ++ep) {
    env::JointState state = env::reset(env_cfg, rng());
    std::vector<std::size_t> first(n);
    for (std::size_t i = 0; i < n; ++i) first[i] = batch.agents[i].visits.size();

    bool done = false;
    while (!done) {
      for (std::size_t i = 0; i < n; ++i) {
        cells[i] = cfg.discretizer.cell(env::observe(state, static_cast<int>(i), env_cfg));
        actions[i] = policies[i].sample_action(cells[i], rng);
      }
      auto next = env::step(state, actions, env_cfg);
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d rel = state.positions[i] - state.targets[i];
        // reward_to_go holds the immediate reward until the backward pass below.
        batch.agents[i].visits.push_back({cells[i], actions[i], rel, next.rewards[i], state.step_index});
        team_total += next.rewards[i];
        if (trajectory) {
          trajectory->push_back({ep, state.step_index, static_cast<int>(i), state.positions[i], state.targets[i],
                                 actions[i], next.rewards[i]});
        }
      }
      done = next.done;
      state = std::move(next.state);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& v = batch.agents[i].visits;
      double acc = 0.0;
      for (std::size_t t = first[i] + horizon; t-- > first[i];) {
        acc += v[t].reward_to_go;
        v[t].reward_to_go = acc;
      }
    }
  }
  batch.mean_team_reward = team_total / cfg.batch_episodes;

  for (auto& agent : batch.agents) {
    agent.atoms = subsample(agent.visits.size(), cfg.atoms_per_agent, rng);
    Matrix support(static_cast<Eigen::Index>(agent.atoms.size()), ot::kEmbeddingDims);
    for (std::size_t k = 0; k < agent.atoms.size(); ++k) {
      const auto& v = agent.visits[agent.atoms[k]];
      support.row(static_cast<Eigen::Index>(k)) = ot::embed_state_action(v.state, v.action).coords.transpose();
    }
    agent.measure = ot::DiscreteMeasure::uniform(std::move(support));
  }
  return batch;
}

}  // namespace wbc::train
