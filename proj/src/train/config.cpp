#include "wbc/train/config.hpp"

#include <cmath>

#include <fmt/format.h>

namespace wbc::train {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::wbc: return "wbc";
    case Method::independent: return "independent";
    case Method::kl_reg: return "kl_reg";
    case Method::param_share: return "param_share";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::wbc, Method::independent, Method::kl_reg, Method::param_share}) {
    if (method_name(m) == name) return m;
  }
  throw std::invalid_argument(
      fmt::format("unknown method '{}' (expected wbc, independent, kl_reg or param_share)", name));
}

void TrainConfig::validate() const {
  auto positive = [](double x, const char* key) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(fmt::format("{} must be > 0, got {}", key, x));
  };
  positive(alpha, "alpha");
  // lambda0 = 0 is allowed: it turns the consensus term off.
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) {
    throw std::invalid_argument(fmt::format("lambda0 must be >= 0, got {}", lambda0));
  }
  positive(epsilon0, "epsilon0");
  positive(beta, "beta");
  positive(epsilon_min, "epsilon_min");
  positive(grad_clip, "grad_clip");
  positive(sinkhorn_tol, "sinkhorn_tol");
  if (lambda_min < 0.0) throw std::invalid_argument("lambda_min must be >= 0");
  if (p < 1 || p > 2) throw std::invalid_argument(fmt::format("p must be 1 or 2, got {}", p));
  if (batch_episodes < 1) throw std::invalid_argument("batch_episodes must be >= 1");
  if (atoms_per_agent < 1) throw std::invalid_argument("atoms_per_agent must be >= 1");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(anneal_fraction > 0.0 && anneal_fraction <= 1.0)) {
    throw std::invalid_argument("anneal_fraction must be in (0, 1]");
  }
  if (sliced_projections < 1) throw std::invalid_argument("sliced_projections must be >= 1");
  if (sinkhorn_max_iters < 1) throw std::invalid_argument("sinkhorn_max_iters must be >= 1");
  if (clipped_surrogate && (!(clip_ratio > 0.0) || surrogate_epochs < 1)) {
    throw std::invalid_argument("clipped surrogate needs clip_ratio > 0 and surrogate_epochs >= 1");
  }
  discretizer.validate();
}

ot::SinkhornConfig TrainConfig::sinkhorn(double epsilon) const {
  ot::SinkhornConfig s;
  s.epsilon = epsilon;
  s.max_iters = sinkhorn_max_iters;
  s.tol = sinkhorn_tol;
  s.p = p;
  return s;
}

ScheduleValues schedule_step(const TrainConfig& cfg, int iteration) {
  if (iteration < 0 || iteration >= cfg.iterations) {
    throw std::out_of_range(fmt::format("schedule_step: iteration {} outside [0, {})", iteration, cfg.iterations));
  }
  if (cfg.schedule == ScheduleMode::fixed) return {cfg.lambda0, cfg.epsilon0};
  const int window = std::max(1, static_cast<int>(std::lround(cfg.anneal_fraction * cfg.iterations)));
  if (iteration >= window) return {cfg.lambda_min, cfg.epsilon_min};
  const double frac = static_cast<double>(iteration) / window;
  return {cfg.lambda0 + (cfg.lambda_min - cfg.lambda0) * frac,
          cfg.epsilon0 * std::pow(cfg.epsilon_min / cfg.epsilon0, frac)};
}

}  // namespace wbc::train
