#include "wbc/exp/probes.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>

namespace wbc::exp {

std::vector<ProbeState> canonical_probes() {
  const std::vector<env::Position> others{{0.1, 0.9}, {0.9, 0.1}, {0.1, 0.1}, {0.9, 0.9}};
  return {
      {"right", {0.3, 0.5}, {0.6, 0.5}, others},
      {"left", {0.7, 0.5}, {0.4, 0.5}, others},
      {"up", {0.5, 0.3}, {0.5, 0.6}, others},
      {"down", {0.5, 0.7}, {0.5, 0.4}, others},
      {"near", {0.5, 0.5}, {0.52, 0.5}, others},
  };
}

void validate_probe(const ProbeState& probe, const env::WorldConfig& env) {
  if (static_cast<int>(probe.others.size()) < env.n_agents - 1) {
    throw std::invalid_argument(fmt::format("probe '{}' places {} other agents, need {}", probe.name,
                                            probe.others.size(), env.n_agents - 1));
  }
  auto inside = [&](const env::Position& p) {
    return (p.array() >= env.arena_min.array()).all() && (p.array() <= env.arena_max.array()).all();
  };
  bool ok = inside(probe.self) && inside(probe.target);
  for (int j = 0; j < env.n_agents - 1; ++j) ok = ok && inside(probe.others[static_cast<std::size_t>(j)]);
  if (!ok) throw std::invalid_argument(fmt::format("probe '{}' has a point outside the arena", probe.name));
}

policy::CellId probe_cell(const ProbeState& probe, int agent, const env::WorldConfig& env,
                          const policy::ObsDiscretizer& disc) {
  env::JointState s;
  std::size_t next = 0;
  for (int j = 0; j < env.n_agents; ++j) {
    const env::Position p = j == agent ? probe.self : probe.others.at(next++);
    s.positions.push_back(p);
    s.targets.push_back(j == agent ? probe.target : p);
  }
  return disc.cell(env::observe(s, agent, env));
}

void write_probe_csv(std::ostream& os, const std::vector<policy::SoftmaxPolicy>& policies,
                     const std::vector<ProbeState>& probes, const env::WorldConfig& env,
                     const policy::ObsDiscretizer& disc) {
  os << "state,agent,action,probability\n";
  for (const auto& probe : probes) {
    for (const auto& pi : policies) {
      const auto probs = pi.action_probs(probe_cell(probe, pi.agent_id(), env, disc));
      for (int a = 0; a < ot::kNumActions; ++a) {
        os << fmt::format("{},{},{},{:.17g}\n", probe.name, pi.agent_id(), ot::action_name(ot::action_from_id(a)),
                          probs(a));
      }
    }
  }
}

double max_pairwise_tv(const std::vector<policy::SoftmaxPolicy>& policies, const std::vector<ProbeState>& probes,
                       const env::WorldConfig& env, const policy::ObsDiscretizer& disc) {
  double worst = 0.0;
  for (const auto& probe : probes) {
    std::vector<policy::ActionProbs> probs;
    for (const auto& pi : policies) probs.push_back(pi.action_probs(probe_cell(probe, pi.agent_id(), env, disc)));
    for (std::size_t i = 0; i < probs.size(); ++i) {
      for (std::size_t j = i + 1; j < probs.size(); ++j) {
        worst = std::max(worst, 0.5 * (probs[i] - probs[j]).cwiseAbs().sum());
      }
    }
  }
  return worst;
}

int shared_modal_count(const std::vector<policy::SoftmaxPolicy>& policies, const std::vector<ProbeState>& probes,
                       const env::WorldConfig& env, const policy::ObsDiscretizer& disc) {
  int count = 0;
  for (const auto& probe : probes) {
    bool same = true;
    for (std::size_t i = 1; i < policies.size() && same; ++i) {
      same = policies[i].argmax_action(probe_cell(probe, policies[i].agent_id(), env, disc)) ==
             policies[0].argmax_action(probe_cell(probe, policies[0].agent_id(), env, disc));
    }
    count += same ? 1 : 0;
  }
  return count;
}

}  // namespace wbc::exp
