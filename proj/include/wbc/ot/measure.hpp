#pragma once

#include "wbc/common.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace wbc::ot {

/// Discrete navigation actions. The enumeration order is also the tie-break
/// order wherever an argmax over actions is taken.
enum class Action : int { stay = 0, right = 1, left = 2, up = 3, down = 4 };

inline constexpr int kNumActions = 5;

/// Layout of an embedded state-action point: the first kStateDims coordinates
/// are state, the rest are the action embedding.
inline constexpr int kStateDims = 2;
inline constexpr int kActionDims = 2;
inline constexpr int kEmbeddingDims = kStateDims + kActionDims;

/// Unit displacement of an action; stay maps to the origin.
Eigen::Vector2d action_vector(Action a);

/// Throws std::invalid_argument for ids outside 0..4.
Action action_from_id(int id);

const char* action_name(Action a);

/// A point of the joint state-action space.
struct EmbeddedPoint {
  Vector coords;

  Eigen::Index dim() const { return coords.size(); }
};

EmbeddedPoint embed_state_action(const Eigen::Vector2d& state, Action action);
EmbeddedPoint embed_state_action(const Eigen::Vector2d& state, int action_id);

/// Weighted point cloud. Row i of `support` is atom i.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  /// Validates: equal, nonzero lengths; finite coordinates; nonnegative
  /// weights summing to 1 within 1e-9.
  DiscreteMeasure(Matrix support, Vector weights);

  static DiscreteMeasure uniform(Matrix support);
  static DiscreteMeasure dirac(const Vector& point);
  static DiscreteMeasure from_points(std::span<const EmbeddedPoint> points, const Vector& weights);

  Eigen::Index size() const { return weights_.size(); }
  Eigen::Index dim() const { return support_.cols(); }

  const Matrix& support() const { return support_; }
  const Vector& weights() const { return weights_; }
  EmbeddedPoint point(Eigen::Index i) const { return {support_.row(i).transpose()}; }

  /// Copy with zero-weight atoms removed. `kept` (optional) receives the
  /// original indices of the surviving atoms.
  DiscreteMeasure pruned(std::vector<Eigen::Index>* kept = nullptr) const;

  /// Copy with atoms reordered lexicographically by (coords, weight).
  /// `order[k]` is the original index of sorted atom k.
  DiscreteMeasure canonical(std::vector<Eigen::Index>* order = nullptr) const;

  /// Exact equality of the (coords, weight) multisets.
  bool same_atoms(const DiscreteMeasure& other) const;

 private:
  Matrix support_;
  Vector weights_;
};

/// Lexicographic order on (size, coords, weights) of canonicalized measures.
bool canonical_less(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Total-variation distance between two weight vectors on a common support.
double total_variation(const Vector& a, const Vector& b);

/// CSV atom list: header coord_0..coord_{d-1},weight then one row per atom.
void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu);
DiscreteMeasure read_measure_csv(std::istream& is);

}  // namespace wbc::ot
