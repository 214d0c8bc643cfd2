#include "wbc/exp/config_file.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace wbc::exp {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw std::invalid_argument(fmt::format("{}: cannot read '{}' as {}", key, value, expected));
}

double to_double(std::string_view key, std::string_view v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(x)) bad_value(key, v, "a number");
  return x;
}

long long to_int(std::string_view key, std::string_view v) {
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void out_of_range(std::string_view key, std::string_view v, std::string_view range) {
  throw std::invalid_argument(fmt::format("{} = {} is out of range ({})", key, v, range));
}

// Checked setters. `lo_open` makes the lower bound exclusive.
struct Real {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;
  double operator()(std::string_view key, std::string_view v) const {
    const double x = to_double(key, v);
    const bool below = lo_open ? !(x > lo) : !(x >= lo);
    if (below || x > hi) {
      out_of_range(key, v, fmt::format("{} {}{}", lo_open ? "must be >" : "must be >=", lo,
                                       std::isfinite(hi) ? fmt::format(" and <= {}", hi) : ""));
    }
    return x;
  }
};

struct Int {
  long long lo = std::numeric_limits<int>::min();
  long long hi = std::numeric_limits<int>::max();
  int operator()(std::string_view key, std::string_view v) const {
    const long long x = to_int(key, v);
    if (x < lo || x > hi) out_of_range(key, v, fmt::format("must be in [{}, {}]", lo, hi));
    return static_cast<int>(x);
  }
};

SweepSpec& sweep_of(ExperimentSpec& s) {
  if (!s.sweep) s.sweep.emplace();
  return *s.sweep;
}

struct KeyDef {
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, std::string_view key, std::string_view value)> set;
};

std::string num(double x) { return fmt::format("{}", x); }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    auto add = [&](std::string name, std::string help, auto get, auto set) {
      t.push_back({std::move(name), std::move(help), get, set});
    };
    using S = ExperimentSpec;
    using V = std::string_view;

    add("methods", "comma list of wbc, independent, kl_reg, param_share",
        [](const S& s) {
          std::vector<std::string_view> names;
          for (auto m : s.methods) names.push_back(train::method_name(m));
          return fmt::format("{}", fmt::join(names, ","));
        },
        [](S& s, V k, V v) {
          s.methods.clear();
          for (auto item : split_list(v)) {
            try {
              s.methods.push_back(train::parse_method(item));
            } catch (const std::invalid_argument& e) {
              throw std::invalid_argument(fmt::format("{}: {}", k, e.what()));
            }
          }
          if (s.methods.empty()) throw std::invalid_argument(fmt::format("{} must name at least one method", k));
        });
    add("seeds", "comma list of non-negative integer seeds",
        [](const S& s) { return fmt::format("{}", fmt::join(s.seeds, ",")); },
        [](S& s, V k, V v) {
          s.seeds.clear();
          for (auto item : split_list(v)) s.seeds.push_back(static_cast<Seed>(Int{0}(k, item)));
          if (s.seeds.empty()) throw std::invalid_argument(fmt::format("{} must list at least one seed", k));
        });
    add("output_dir", "directory for CSV and SVG outputs", [](const S& s) { return s.output_dir.string(); },
        [](S& s, V k, V v) {
          if (v.empty()) throw std::invalid_argument(fmt::format("{} must not be empty", k));
          s.output_dir = std::string(v);
        });
    add("map_resolution", "policy map grid points per axis (>= 2)",
        [](const S& s) { return std::to_string(s.map_resolution); },
        [](S& s, V k, V v) { s.map_resolution = Int{2, 1000}(k, v); });
    add("threads", "concurrent runs (0 = OpenMP default)", [](const S& s) { return std::to_string(s.threads); },
        [](S& s, V k, V v) { s.threads = Int{0, 1024}(k, v); });

    add("n_agents", "number of agents", [](const S& s) { return std::to_string(s.env.n_agents); },
        [](S& s, V k, V v) { s.env.n_agents = Int{2, 64}(k, v); });
    add("step_size", "distance moved per non-stay action", [](const S& s) { return num(s.env.step_size); },
        [](S& s, V k, V v) { s.env.step_size = Real{0.0, 1e300, true}(k, v); });
    add("collision_radius", "agents closer than this collide", [](const S& s) { return num(s.env.collision_radius); },
        [](S& s, V k, V v) { s.env.collision_radius = Real{0.0, 1e300, true}(k, v); });
    add("collision_penalty", "reward penalty per colliding neighbour",
        [](const S& s) { return num(s.env.collision_penalty); },
        [](S& s, V k, V v) { s.env.collision_penalty = Real{0.0}(k, v); });
    add("episode_length", "steps per episode", [](const S& s) { return std::to_string(s.env.episode_length); },
        [](S& s, V k, V v) { s.env.episode_length = Int{1}(k, v); });
    add("target_mode", "fixed_per_seed or resampled_per_episode",
        [](const S& s) {
          return std::string(s.env.target_mode == env::TargetMode::fixed_per_seed ? "fixed_per_seed"
                                                                                  : "resampled_per_episode");
        },
        [](S& s, V k, V v) {
          if (v == "fixed_per_seed") {
            s.env.target_mode = env::TargetMode::fixed_per_seed;
          } else if (v == "resampled_per_episode") {
            s.env.target_mode = env::TargetMode::resampled_per_episode;
          } else {
            bad_value(k, v, "fixed_per_seed or resampled_per_episode");
          }
        });
    add("target_margin", "targets keep this distance from the arena border",
        [](const S& s) { return num(s.env.target_margin); },
        [](S& s, V k, V v) { s.env.target_margin = Real{0.0, 0.49}(k, v); });

    add("alpha", "policy learning rate", [](const S& s) { return num(s.train.alpha); },
        [](S& s, V k, V v) { s.train.alpha = Real{0.0, 1e300, true}(k, v); });
    add("lambda0", "consensus weight (initial value when annealing)", [](const S& s) { return num(s.train.lambda0); },
        [](S& s, V k, V v) { s.train.lambda0 = Real{0.0}(k, v); });
    add("epsilon0", "entropic regularization (initial value when annealing)",
        [](const S& s) { return num(s.train.epsilon0); },
        [](S& s, V k, V v) { s.train.epsilon0 = Real{0.0, 1e300, true}(k, v); });
    add("beta", "action weight in the ground metric", [](const S& s) { return num(s.train.beta); },
        [](S& s, V k, V v) { s.train.beta = Real{0.0, 1e300, true}(k, v); });
    add("p", "ground cost exponent (1 or 2)", [](const S& s) { return std::to_string(s.train.p); },
        [](S& s, V k, V v) { s.train.p = Int{1, 2}(k, v); });
    add("batch_episodes", "episodes per iteration", [](const S& s) { return std::to_string(s.train.batch_episodes); },
        [](S& s, V k, V v) { s.train.batch_episodes = Int{1}(k, v); });
    add("atoms_per_agent", "atoms in each visitation measure",
        [](const S& s) { return std::to_string(s.train.atoms_per_agent); },
        [](S& s, V k, V v) { s.train.atoms_per_agent = Int{1}(k, v); });
    add("iterations", "training iterations per run", [](const S& s) { return std::to_string(s.train.iterations); },
        [](S& s, V k, V v) { s.train.iterations = Int{1}(k, v); });
    add("schedule", "fixed or anneal",
        [](const S& s) {
          return std::string(s.train.schedule == train::ScheduleMode::fixed ? "fixed" : "anneal");
        },
        [](S& s, V k, V v) {
          if (v == "fixed") {
            s.train.schedule = train::ScheduleMode::fixed;
          } else if (v == "anneal") {
            s.train.schedule = train::ScheduleMode::anneal;
          } else {
            bad_value(k, v, "fixed or anneal");
          }
        });
    add("lambda_min", "final consensus weight when annealing", [](const S& s) { return num(s.train.lambda_min); },
        [](S& s, V k, V v) { s.train.lambda_min = Real{0.0}(k, v); });
    add("epsilon_min", "final regularization when annealing", [](const S& s) { return num(s.train.epsilon_min); },
        [](S& s, V k, V v) { s.train.epsilon_min = Real{0.0, 1e300, true}(k, v); });
    add("anneal_fraction", "fraction of the run spent annealing",
        [](const S& s) { return num(s.train.anneal_fraction); },
        [](S& s, V k, V v) { s.train.anneal_fraction = Real{0.0, 1.0, true}(k, v); });
    add("use_sliced_for_diagnostics", "report sliced distances in the diagnostics",
        [](const S& s) { return std::string(s.train.use_sliced_for_diagnostics ? "true" : "false"); },
        [](S& s, V k, V v) { s.train.use_sliced_for_diagnostics = to_bool(k, v); });
    add("sliced_projections", "random directions for sliced distances",
        [](const S& s) { return std::to_string(s.train.sliced_projections); },
        [](S& s, V k, V v) { s.train.sliced_projections = Int{1}(k, v); });
    add("grad_clip", "per-row gradient norm cap", [](const S& s) { return num(s.train.grad_clip); },
        [](S& s, V k, V v) { s.train.grad_clip = Real{0.0, 1e300, true}(k, v); });
    add("sinkhorn_tol", "marginal tolerance of the transport solvers",
        [](const S& s) { return num(s.train.sinkhorn_tol); },
        [](S& s, V k, V v) { s.train.sinkhorn_tol = Real{0.0, 1.0, true}(k, v); });
    add("sinkhorn_max_iters", "iteration budget of the transport solvers",
        [](const S& s) { return std::to_string(s.train.sinkhorn_max_iters); },
        [](S& s, V k, V v) { s.train.sinkhorn_max_iters = Int{1}(k, v); });
    add("clipped_surrogate", "use the clipped surrogate for the reward term",
        [](const S& s) { return std::string(s.train.clipped_surrogate ? "true" : "false"); },
        [](S& s, V k, V v) { s.train.clipped_surrogate = to_bool(k, v); });
    add("clip_ratio", "surrogate clip range", [](const S& s) { return num(s.train.clip_ratio); },
        [](S& s, V k, V v) { s.train.clip_ratio = Real{0.0, 1e300, true}(k, v); });
    add("surrogate_epochs", "surrogate passes per batch",
        [](const S& s) { return std::to_string(s.train.surrogate_epochs); },
        [](S& s, V k, V v) { s.train.surrogate_epochs = Int{1}(k, v); });
    add("record_wall_time", "fill the wall_ms column (makes CSVs non-reproducible)",
        [](const S& s) { return std::string(s.train.record_wall_time ? "true" : "false"); },
        [](S& s, V k, V v) { s.train.record_wall_time = to_bool(k, v); });
    add("resolution", "bins per axis of each observation offset",
        [](const S& s) { return std::to_string(s.train.discretizer.resolution); },
        [](S& s, V k, V v) { s.train.discretizer.resolution = Int{1, 64}(k, v); });
    add("own_range", "clip range of the offset to the target",
        [](const S& s) { return num(s.train.discretizer.own_range); },
        [](S& s, V k, V v) { s.train.discretizer.own_range = Real{0.0, 1e300, true}(k, v); });
    add("other_range", "clip range of the offset to the nearest agent",
        [](const S& s) { return num(s.train.discretizer.other_range); },
        [](S& s, V k, V v) { s.train.discretizer.other_range = Real{0.0, 1e300, true}(k, v); });

    add("sweep", "also run the sample-size sweep",
        [](const S& s) { return std::string(s.sweep ? "true" : "false"); },
        [](S& s, V k, V v) {
          if (to_bool(k, v)) {
            sweep_of(s);
          } else {
            s.sweep.reset();
          }
        });
    add("sweep_m", "comma list of sample sizes",
        [](const S& s) { return fmt::format("{}", fmt::join(s.sweep.value_or(SweepSpec{}).m_values, ",")); },
        [](S& s, V k, V v) {
          auto& sw = sweep_of(s);
          sw.m_values.clear();
          for (auto item : split_list(v)) sw.m_values.push_back(Int{1}(k, item));
          if (sw.m_values.empty()) throw std::invalid_argument(fmt::format("{} must list at least one size", k));
        });
    add("sweep_measures", "input measures per barycenter",
        [](const S& s) { return std::to_string(s.sweep.value_or(SweepSpec{}).n_measures); },
        [](S& s, V k, V v) { sweep_of(s).n_measures = Int{1, 64}(k, v); });
    add("sweep_replicates", "replicates per sample size",
        [](const S& s) { return std::to_string(s.sweep.value_or(SweepSpec{}).replicates); },
        [](S& s, V k, V v) { sweep_of(s).replicates = Int{1}(k, v); });
    add("sweep_p", "cost exponent of the sweep (1 or 2)",
        [](const S& s) { return std::to_string(s.sweep.value_or(SweepSpec{}).p); },
        [](S& s, V k, V v) { sweep_of(s).p = Int{1, 2}(k, v); });
    add("sweep_lattice", "barycenter support points on [0, 1]",
        [](const S& s) { return std::to_string(s.sweep.value_or(SweepSpec{}).lattice_points); },
        [](S& s, V k, V v) { sweep_of(s).lattice_points = Int{2, 4096}(k, v); });
    add("sweep_ref_factor", "reference sample count as a multiple of the largest m",
        [](const S& s) { return std::to_string(s.sweep.value_or(SweepSpec{}).ref_factor); },
        [](S& s, V k, V v) { sweep_of(s).ref_factor = Int{1, 1000}(k, v); });
    add("sweep_seed", "seed of the sweep's samples",
        [](const S& s) { return std::to_string(s.sweep.value_or(SweepSpec{}).seed); },
        [](S& s, V k, V v) { sweep_of(s).seed = static_cast<Seed>(Int{0}(k, v)); });
    add("sweep_tol", "marginal tolerance of the sweep's solvers",
        [](const S& s) { return num(s.sweep.value_or(SweepSpec{}).tol); },
        [](S& s, V k, V v) { sweep_of(s).tol = Real{0.0, 1.0, true}(k, v); });
    return t;
  }();
  return table;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

void ExperimentSpec::validate() const {
  if (methods.empty()) throw std::invalid_argument("methods must name at least one method");
  if (seeds.empty()) throw std::invalid_argument("seeds must list at least one seed");
  if (map_resolution < 2) throw std::invalid_argument("map_resolution must be >= 2");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  env.validate();
  train.validate();
  for (const auto& probe : probe_states) validate_probe(probe, env);
  if (sweep) sweep->validate();
}

std::vector<ConfigKey> config_keys() {
  const ExperimentSpec defaults;
  std::vector<ConfigKey> out;
  for (const auto& k : key_table()) out.push_back({k.name, k.help, k.get(defaults)});
  return out;
}

std::string nearest_key(std::string_view unknown) {
  const auto& table = key_table();
  const auto best = std::min_element(table.begin(), table.end(), [&](const KeyDef& x, const KeyDef& y) {
    return edit_distance(unknown, x.name) < edit_distance(unknown, y.name);
  });
  return best->name;
}

void set_key(ExperimentSpec& spec, std::string_view key, std::string_view value) {
  const auto& table = key_table();
  const auto it = std::find_if(table.begin(), table.end(), [&](const KeyDef& k) { return k.name == key; });
  if (it == table.end()) {
    throw std::invalid_argument(fmt::format("unknown key '{}' (did you mean '{}'?)", key, nearest_key(key)));
  }
  it->set(spec, key, value);
}

ExperimentSpec parse_config_text(std::string_view text, std::string_view source) {
  ExperimentSpec spec;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", source, line_no, line), line_no);
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      set_key(spec, key, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source, line_no, e.what()), line_no);
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()), 0);
  }
  return spec;
}

ExperimentSpec parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()), 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

void apply_overrides(ExperimentSpec& spec, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not key=value", a), 0);
    try {
      set_key(spec, trim(std::string_view(a).substr(0, eq)), trim(std::string_view(a).substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("override '{}': {}", a, e.what()), 0);
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), 0);
  }
}

}  // namespace wbc::exp
