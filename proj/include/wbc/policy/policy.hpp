#pragma once

#include "wbc/common.hpp"
#include "wbc/env/nav.hpp"
#include "wbc/ot/measure.hpp"

#include <iosfwd>
#include <random>
#include <span>
#include <utility>

namespace wbc::policy {

using ot::Action;
using ot::kNumActions;
using ActionProbs = Eigen::Matrix<double, kNumActions, 1>;
using CellId = int;

/// Maps an observation to a table cell from two binned 2D offsets:
/// own position relative to target, and the nearest other agent relative to
/// self (ties go to the lower agent index). Each offset is clipped to
/// [-range, range] and cut into `resolution` bins per axis; offsets beyond the
/// range land in the outermost bins.
///
/// cell = own_bin * resolution^2 + other_bin, bin = bx + resolution * by.
/// With the defaults, own offset (0,0) with the nearest agent at (+range,+range)
/// is cell 36 * 64 + 63 = 2367.
struct ObsDiscretizer {
  int resolution = 8;
  double own_range = 0.5;
  double other_range = 0.4;

  int n_cells() const { return resolution * resolution * resolution * resolution; }
  void validate() const;

  CellId cell(const Vector& observation) const;
  CellId cell_from_offsets(const Eigen::Vector2d& own_offset, const Eigen::Vector2d& other_offset) const;
  int bin(double x, double range) const;
};

/// Dense gradient shaped like the logits table.
using PolicyGradient = Matrix;

class SoftmaxPolicy {
 public:
  SoftmaxPolicy(int n_cells, int agent_id);

  int n_cells() const { return static_cast<int>(logits_.rows()); }
  int agent_id() const { return agent_id_; }

  const Matrix& logits() const { return logits_; }
  Matrix& logits() { return logits_; }

  ActionProbs action_probs(CellId cell) const;

  /// Categorical draw; consumes exactly one uniform variate.
  Action sample_action(CellId cell, std::mt19937_64& rng) const;

  /// Highest-probability action; ties go to the earlier action in enum order.
  Action argmax_action(CellId cell) const;

  PolicyGradient zero_gradient() const { return Matrix::Zero(logits_.rows(), kNumActions); }

  /// grad.row(cell) += scale * (onehot(action) - probs(cell))
  void accumulate_log_prob_grad(PolicyGradient& grad, CellId cell, Action action, double scale) const;

  /// Gradient of log pi(action | cell) with respect to the logits.
  PolicyGradient log_prob_grad(CellId cell, Action action) const;

  /// Mean over `cells` of KL(pi(.|c) || reference.row(c)) and its exact logits
  /// gradient (reference held fixed). Reference rows must be strictly positive.
  std::pair<double, PolicyGradient> kl_to_reference(const Matrix& reference, std::span<const CellId> cells) const;

  void write_csv(std::ostream& os) const;
  static SoftmaxPolicy read_csv(std::istream& is, int agent_id);

 private:
  void check_cell(CellId cell) const;

  Matrix logits_;
  int agent_id_;
};

}  // namespace wbc::policy
