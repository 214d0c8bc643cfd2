#pragma once

#include "wbc/ot/cost.hpp"
#include "wbc/ot/sinkhorn.hpp"

namespace wbc::ot {

inline constexpr Eigen::Index kMaxLpAtoms = 16;

struct ExactOtResult {
  double cost = 0.0;
  CouplingPlan plan;
  int pivots = 0;
};

/// Unregularized OT by the transportation simplex (north-west corner start,
/// MODI potentials, Bland's smallest-index rule for entering and leaving
/// cells). Zero-weight atoms are dropped before solving; more than
/// kMaxLpAtoms remaining atoms on either side is refused. `cost` is indexed
/// in the callers' atom order.
ExactOtResult exact_ot_lp(const DiscreteMeasure& src, const DiscreteMeasure& dst, const CostMatrix& cost);

}  // namespace wbc::ot
