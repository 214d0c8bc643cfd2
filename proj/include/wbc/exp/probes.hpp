#pragma once

#include "wbc/env/nav.hpp"
#include "wbc/policy/policy.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace wbc::exp {

/// A fixed observation context: the probed agent sits at `self` with target
/// `target`; the other agents occupy `others` in order.
struct ProbeState {
  std::string name;
  env::Position self;
  env::Position target;
  std::vector<env::Position> others;
};

/// right: (0.3,0.5) -> (0.6,0.5)   left: (0.7,0.5) -> (0.4,0.5)
/// up:    (0.5,0.3) -> (0.5,0.6)   down: (0.5,0.7) -> (0.5,0.4)
/// near:  (0.5,0.5) -> (0.52,0.5)
/// Others at (0.1,0.9), (0.9,0.1), (0.1,0.1), (0.9,0.9), used as needed.
std::vector<ProbeState> canonical_probes();

/// Throws std::invalid_argument if the probe lacks others for env.n_agents or
/// puts anyone outside the arena.
void validate_probe(const ProbeState& probe, const env::WorldConfig& env);

/// Table cell of `agent` when it is placed at the probe's self position.
policy::CellId probe_cell(const ProbeState& probe, int agent, const env::WorldConfig& env,
                          const policy::ObsDiscretizer& disc);

/// Columns: state, agent, action, probability.
void write_probe_csv(std::ostream& os, const std::vector<policy::SoftmaxPolicy>& policies,
                     const std::vector<ProbeState>& probes, const env::WorldConfig& env,
                     const policy::ObsDiscretizer& disc);

/// Largest total-variation distance between two agents' action distributions
/// over all probe states and agent pairs.
double max_pairwise_tv(const std::vector<policy::SoftmaxPolicy>& policies, const std::vector<ProbeState>& probes,
                       const env::WorldConfig& env, const policy::ObsDiscretizer& disc);

/// Probe states on which every agent has the same argmax action.
int shared_modal_count(const std::vector<policy::SoftmaxPolicy>& policies, const std::vector<ProbeState>& probes,
                       const env::WorldConfig& env, const policy::ObsDiscretizer& disc);

}  // namespace wbc::exp
