#pragma once

#include "wbc/ot/sinkhorn.hpp"

#include <functional>
#include <span>
#include <vector>

namespace wbc::ot {

struct BarycenterResult {
  DiscreteMeasure measure;
  int iterations_used = 0;
  double marginal_residual = 0.0;
  bool log_domain = false;
};

/// Called after every projection step with the current (normalized) barycenter
/// weights, in the caller's support order.
using BarycenterObserver = std::function<void(int iteration, const Vector& weights)>;

/// Fixed-support entropic barycenter with uniform weights 1/N by iterative
/// Bregman projections. Per input i we keep scalings (u_i, v_i) and alternate
///
///   u_i <- a_i / (K_i v_i)
///   b   <- eta * prod_i (K_i^T u_i)^(1/N), normalized to unit mass
///   v_i <- b / (K_i^T u_i)
///
/// which is the fixed point of (1/N) sum_i OT_eps(b, mu_i) + eps KL(b | eta).
/// Stops once every row marginal is within cfg.tol (L1) of its input weights.
/// Runs in log space under the same rule as sinkhorn_ot.
BarycenterResult sinkhorn_barycenter(std::span<const DiscreteMeasure> measures, const Matrix& support,
                                     const SinkhornConfig& cfg, double beta,
                                     const Vector& reference_weights,
                                     const BarycenterObserver& observer = {});

/// Same, with the uniform reference measure on `support`.
BarycenterResult sinkhorn_barycenter(std::span<const DiscreteMeasure> measures, const Matrix& support,
                                     const SinkhornConfig& cfg, double beta);

BarycenterResult sinkhorn_barycenter(std::span<const DiscreteMeasure> measures,
                                     std::span<const EmbeddedPoint> support, const SinkhornConfig& cfg,
                                     double beta, const Vector& reference_weights);

/// Union of all measures' atoms, deduplicated within `merge_distance`
/// (Euclidean), in first-seen order.
Matrix pooled_support(std::span<const DiscreteMeasure> measures, double merge_distance = 1e-9);

}  // namespace wbc::ot
