#include "wbc/env/nav.hpp"

#include <algorithm>
#include <ostream>
#include <random>

#include <fmt/format.h>

namespace wbc::env {

namespace {

constexpr int kMaxAttempts = 1000;
constexpr Seed kTargetStream = 0x9e3779b97f4a7c15ULL;

std::vector<Position> separated_points(std::mt19937_64& rng, int n, const Eigen::Vector2d& lo,
                                       const Eigen::Vector2d& hi, double min_sep, const char* what) {
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<Position> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double x = ux(rng);
      const double y = uy(rng);
      pts.emplace_back(x, y);
    }
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) ok = (pts[i] - pts[j]).norm() >= min_sep;
    }
    if (ok) return pts;
  }
  throw std::runtime_error(fmt::format(
      "reset: could not place {} {} with separation {} in {} attempts (arena too crowded)", n, what,
      min_sep, kMaxAttempts));
}

Position clamp(const Position& p, const WorldConfig& cfg) {
  return p.cwiseMax(cfg.arena_min).cwiseMin(cfg.arena_max);
}

}  // namespace

void WorldConfig::validate() const {
  if (n_agents < 2) throw std::invalid_argument(fmt::format("n_agents must be >= 2, got {}", n_agents));
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
  if (!(collision_radius > 0.0)) throw std::invalid_argument("collision_radius must be > 0");
  if (!(collision_penalty >= 0.0)) throw std::invalid_argument("collision_penalty must be >= 0");
  if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (!((arena_max - arena_min).array() > 0.0).all()) throw std::invalid_argument("arena is empty");
  if (!(target_margin >= 0.0) || !((arena_max - arena_min).array() > 2.0 * target_margin).all()) {
    throw std::invalid_argument("target_margin leaves no room for targets");
  }
}

JointState reset(const WorldConfig& cfg, Seed seed) {
  cfg.validate();
  JointState s;
  std::mt19937_64 rng(seed);
  s.positions = separated_points(rng, cfg.n_agents, cfg.arena_min, cfg.arena_max, cfg.collision_radius,
                                 "agents");
  const Eigen::Vector2d margin = Eigen::Vector2d::Constant(cfg.target_margin);
  std::mt19937_64 target_rng(cfg.target_mode == TargetMode::fixed_per_seed ? cfg.target_seed ^ kTargetStream
                                                                           : seed ^ kTargetStream);
  s.targets = separated_points(target_rng, cfg.n_agents, cfg.arena_min + margin, cfg.arena_max - margin,
                               2.0 * cfg.collision_radius, "targets");
  s.step_index = 0;
  return s;
}

StepResult step(const JointState& state, const std::vector<Action>& actions, const WorldConfig& cfg) {
  if (state.step_index >= cfg.episode_length) {
    throw InvalidStateError(fmt::format("step: episode already finished at step {}", state.step_index));
  }
  const auto n = static_cast<std::size_t>(cfg.n_agents);
  if (actions.size() != n || state.positions.size() != n || state.targets.size() != n) {
    throw std::invalid_argument("step: agent count mismatch");
  }
  StepResult r;
  r.state = state;
  for (std::size_t i = 0; i < n; ++i) {
    r.state.positions[i] = clamp(state.positions[i] + cfg.step_size * ot::action_vector(actions[i]), cfg);
  }
  r.rewards.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double reward = -(r.state.positions[i] - r.state.targets[i]).norm();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && (r.state.positions[i] - r.state.positions[j]).norm() < cfg.collision_radius) {
        reward -= cfg.collision_penalty;
      }
    }
    r.rewards[i] = reward;
  }
  r.state.step_index = state.step_index + 1;
  r.done = r.state.step_index == cfg.episode_length;
  return r;
}

Vector observe(const JointState& state, int agent, const WorldConfig& cfg) {
  if (agent < 0 || agent >= cfg.n_agents) {
    throw std::out_of_range(fmt::format("observe: agent {} out of range", agent));
  }
  Vector obs(observation_dim(cfg));
  const auto a = static_cast<std::size_t>(agent);
  obs.segment<2>(0) = state.positions[a];
  obs.segment<2>(2) = state.targets[a];
  Eigen::Index k = 4;
  for (std::size_t j = 0; j < state.positions.size(); ++j) {
    if (j == a) continue;
    obs.segment<2>(k) = state.positions[j];
    k += 2;
  }
  return obs;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << "episode,step,agent,px,py,tx,ty,action,reward\n";
  for (const auto& r : rows) {
    os << fmt::format("{},{},{},{:.10g},{:.10g},{:.10g},{:.10g},{},{:.10g}\n", r.episode, r.step, r.agent,
                      r.position.x(), r.position.y(), r.target.x(), r.target.y(),
                      ot::action_name(r.action), r.reward);
  }
}

}  // namespace wbc::env
