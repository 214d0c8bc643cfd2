#include "wbc/exp/policy_map.hpp"

#include "wbc/train/trainer.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

namespace wbc::exp {

PolicyMap compute_policy_map(const policy::SoftmaxPolicy& policy, int agent, const env::WorldConfig& env,
                             const policy::ObsDiscretizer& disc, int resolution, const env::JointState& context) {
  if (resolution < 2) throw std::invalid_argument(fmt::format("policy map resolution must be >= 2, got {}", resolution));
  if (agent < 0 || agent >= static_cast<int>(context.positions.size())) {
    throw std::invalid_argument(fmt::format("policy map: agent {} not in context", agent));
  }
  PolicyMap map;
  map.resolution = resolution;
  map.target = context.targets[static_cast<std::size_t>(agent)];
  env::JointState s = context;
  const env::Position extent = env.arena_max - env.arena_min;
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const env::Position p = env.arena_min + env::Position((ix + 0.5) / resolution * extent.x(),
                                                            (iy + 0.5) / resolution * extent.y());
      s.positions[static_cast<std::size_t>(agent)] = p;
      map.points.push_back(p);
      map.actions.push_back(policy.argmax_action(disc.cell(env::observe(s, agent, env))));
    }
  }
  return map;
}

env::JointState map_context(const env::WorldConfig& env, Seed seed) {
  return env::reset(train::world_for_seed(env, seed), seed);
}

double fraction_toward_target(const PolicyMap& map, const env::WorldConfig& env) {
  if (map.points.empty()) return 0.0;
  int closer = 0;
  for (std::size_t k = 0; k < map.points.size(); ++k) {
    const env::Position& p = map.points[k];
    const env::Position moved =
        (p + env.step_size * ot::action_vector(map.actions[k])).cwiseMax(env.arena_min).cwiseMin(env.arena_max);
    if ((moved - map.target).norm() < (p - map.target).norm()) ++closer;
  }
  return static_cast<double>(closer) / static_cast<double>(map.points.size());
}

void write_policy_map_csv(std::ostream& os, const PolicyMap& map) {
  os << "x,y,action\n";
  for (std::size_t k = 0; k < map.points.size(); ++k) {
    os << fmt::format("{:.17g},{:.17g},{}\n", map.points[k].x(), map.points[k].y(), ot::action_name(map.actions[k]));
  }
}

namespace {

const char* action_colour(ot::Action a) {
  switch (a) {
    case ot::Action::right: return "#d62728";
    case ot::Action::left: return "#1f77b4";
    case ot::Action::up: return "#2ca02c";
    case ot::Action::down: return "#ff7f0e";
    case ot::Action::stay: return "#9a9a9a";
  }
  return "#000000";
}

}  // namespace

void write_policy_map_svg(std::ostream& os, const PolicyMap& map, const env::WorldConfig& env) {
  constexpr double size = 400.0;
  constexpr double legend = 90.0;
  const env::Position extent = env.arena_max - env.arena_min;
  const double cell = size / map.resolution;
  // SVG y grows downward; flip so up is up.
  auto sx = [&](double x) { return (x - env.arena_min.x()) / extent.x() * size; };
  auto sy = [&](double y) { return size - (y - env.arena_min.y()) / extent.y() * size; };

  os << fmt::format(R"(<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">
)",
                    size + legend, size);
  for (std::size_t k = 0; k < map.points.size(); ++k) {
    const int ix = static_cast<int>(k) % map.resolution;
    const int iy = static_cast<int>(k) / map.resolution;
    os << fmt::format(R"(<rect x="{:.3f}" y="{:.3f}" width="{:.3f}" height="{:.3f}" fill="{}"/>)"
                      "\n",
                      ix * cell, size - (iy + 1) * cell, cell, cell, action_colour(map.actions[k]));
  }

  const double cx = sx(map.target.x());
  const double cy = sy(map.target.y());
  std::string star;
  for (int k = 0; k < 10; ++k) {
    const double r = k % 2 == 0 ? 12.0 : 5.0;
    const double ang = -std::numbers::pi / 2 + k * std::numbers::pi / 5;
    star += fmt::format("{}{:.3f},{:.3f}", k == 0 ? "" : " ", cx + r * std::cos(ang), cy + r * std::sin(ang));
  }
  os << fmt::format(R"(<polygon points="{}" fill="#ffd700" stroke="#000000" stroke-width="1"/>)"
                    "\n",
                    star);

  int row = 0;
  for (auto a : {ot::Action::right, ot::Action::left, ot::Action::up, ot::Action::down, ot::Action::stay}) {
    const double y = 20.0 + 22.0 * row++;
    os << fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="14" height="14" fill="{}"/>)"
                      "\n",
                      size + 10.0, y, action_colour(a));
    os << fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-family="sans-serif" font-size="12">{}</text>)"
                      "\n",
                      size + 30.0, y + 12.0, ot::action_name(a));
  }
  os << "</svg>\n";
}

}  // namespace wbc::exp
