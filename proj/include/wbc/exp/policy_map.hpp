#pragma once

#include "wbc/env/nav.hpp"
#include "wbc/policy/policy.hpp"

#include <iosfwd>
#include <vector>

namespace wbc::exp {

/// Argmax actions of one agent over a resolution x resolution grid of its own
/// position, with its target and the other agents held at `context`.
struct PolicyMap {
  int resolution = 0;
  /// Grid point coordinates, row-major with x varying fastest.
  std::vector<env::Position> points;
  std::vector<ot::Action> actions;
  env::Position target;
};

/// Grid points sit at cell centres of the arena. Throws std::invalid_argument
/// for resolution < 2.
PolicyMap compute_policy_map(const policy::SoftmaxPolicy& policy, int agent, const env::WorldConfig& env,
                             const policy::ObsDiscretizer& disc, int resolution, const env::JointState& context);

/// Joint state at the start of a run with `seed`: the map's fixed context.
env::JointState map_context(const env::WorldConfig& env, Seed seed);

/// Share of grid points whose argmax move ends closer to the target.
double fraction_toward_target(const PolicyMap& map, const env::WorldConfig& env);

/// Columns: x, y, action.
void write_policy_map_csv(std::ostream& os, const PolicyMap& map);

/// Arrow-free colour grid: red right, blue left, green up, orange down, gray
/// stay, with a star on the target.
void write_policy_map_svg(std::ostream& os, const PolicyMap& map, const env::WorldConfig& env);

}  // namespace wbc::exp
