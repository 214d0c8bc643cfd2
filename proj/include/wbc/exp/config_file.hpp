#pragma once

#include "wbc/env/nav.hpp"
#include "wbc/exp/fast_rate.hpp"
#include "wbc/exp/probes.hpp"
#include "wbc/train/config.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wbc::exp {

struct ExperimentSpec {
  std::vector<train::Method> methods{train::Method::wbc, train::Method::independent, train::Method::kl_reg,
                                     train::Method::param_share};
  std::vector<Seed> seeds{0, 1, 2, 3, 4};
  env::WorldConfig env;
  train::TrainConfig train;
  std::vector<ProbeState> probe_states = canonical_probes();
  std::filesystem::path output_dir = "wbc_out";
  /// Grid points per axis of the policy maps.
  int map_resolution = 20;
  /// Concurrent runs in a comparison; 0 leaves it to OpenMP.
  int threads = 0;
  /// Present when `sweep = true`.
  std::optional<SweepSpec> sweep;

  void validate() const;
};

/// Parse or validation failure. `line` is 0 for problems not tied to a line
/// (command-line overrides, cross-key checks).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::string default_value;
};

/// Every accepted key with its help text and default, in documentation order.
std::vector<ConfigKey> config_keys();

/// Closest accepted key by edit distance.
std::string nearest_key(std::string_view unknown);

/// Sets one key on `spec`. Throws std::invalid_argument on unknown keys,
/// malformed values or out-of-range values; messages name the key.
void set_key(ExperimentSpec& spec, std::string_view key, std::string_view value);

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
/// Keys may repeat, the last one wins.
ExperimentSpec parse_config_text(std::string_view text, std::string_view source = "<config>");
ExperimentSpec parse_config_file(const std::filesystem::path& path);

/// Applies `key=value` overrides in order, then revalidates.
void apply_overrides(ExperimentSpec& spec, const std::vector<std::string>& assignments);

}  // namespace wbc::exp
