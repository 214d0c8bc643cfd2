#include "wbc/ot/measure.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace wbc::ot {

Eigen::Vector2d action_vector(Action a) {
  switch (a) {
    case Action::stay: return {0.0, 0.0};
    case Action::right: return {1.0, 0.0};
    case Action::left: return {-1.0, 0.0};
    case Action::up: return {0.0, 1.0};
    case Action::down: return {0.0, -1.0};
  }
  throw std::invalid_argument("unknown action");
}

Action action_from_id(int id) {
  if (id < 0 || id >= kNumActions) {
    throw std::invalid_argument(fmt::format("unknown action id {}", id));
  }
  return static_cast<Action>(id);
}

const char* action_name(Action a) {
  switch (a) {
    case Action::stay: return "stay";
    case Action::right: return "right";
    case Action::left: return "left";
    case Action::up: return "up";
    case Action::down: return "down";
  }
  return "?";
}

EmbeddedPoint embed_state_action(const Eigen::Vector2d& state, Action action) {
  EmbeddedPoint p{Vector(kEmbeddingDims)};
  p.coords.head<kStateDims>() = state;
  p.coords.tail<kActionDims>() = action_vector(action);
  return p;
}

EmbeddedPoint embed_state_action(const Eigen::Vector2d& state, int action_id) {
  return embed_state_action(state, action_from_id(action_id));
}

DiscreteMeasure::DiscreteMeasure(Matrix support, Vector weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (weights_.size() == 0) throw std::invalid_argument("measure must have at least one atom");
  if (support_.rows() != weights_.size()) {
    throw std::invalid_argument(fmt::format("support has {} atoms but {} weights", support_.rows(),
                                            weights_.size()));
  }
  if (!support_.allFinite()) throw std::invalid_argument("support coordinates must be finite");
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw std::invalid_argument("weights must be finite and nonnegative");
  }
  const double total = weights_.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(fmt::format("weights sum to {:.12g}, expected 1", total));
  }
}

DiscreteMeasure DiscreteMeasure::uniform(Matrix support) {
  const auto n = support.rows();
  if (n == 0) throw std::invalid_argument("measure must have at least one atom");
  return {std::move(support), Vector::Constant(n, 1.0 / static_cast<double>(n))};
}

DiscreteMeasure DiscreteMeasure::dirac(const Vector& point) {
  Matrix s(1, point.size());
  s.row(0) = point.transpose();
  return {std::move(s), Vector::Ones(1)};
}

DiscreteMeasure DiscreteMeasure::from_points(std::span<const EmbeddedPoint> points,
                                             const Vector& weights) {
  if (points.empty()) throw std::invalid_argument("measure must have at least one atom");
  const auto d = points.front().dim();
  Matrix s(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dim() != d) throw std::invalid_argument("points have mixed dimensions");
    s.row(static_cast<Eigen::Index>(i)) = points[i].coords.transpose();
  }
  return {std::move(s), weights};
}

DiscreteMeasure DiscreteMeasure::pruned(std::vector<Eigen::Index>* kept) const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (weights_[i] > 0.0) idx.push_back(i);
  }
  if (kept) *kept = idx;
  if (static_cast<Eigen::Index>(idx.size()) == size()) return *this;

  DiscreteMeasure out;
  out.support_.resize(static_cast<Eigen::Index>(idx.size()), dim());
  out.weights_.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.support_.row(static_cast<Eigen::Index>(k)) = support_.row(idx[k]);
    out.weights_[static_cast<Eigen::Index>(k)] = weights_[idx[k]];
  }
  return out;
}

DiscreteMeasure DiscreteMeasure::canonical(std::vector<Eigen::Index>* order) const {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [this](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < dim(); ++c) {
      if (support_(a, c) != support_(b, c)) return support_(a, c) < support_(b, c);
    }
    return weights_[a] < weights_[b];
  });
  if (order) *order = idx;

  DiscreteMeasure out;
  out.support_.resize(size(), dim());
  out.weights_.resize(size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.support_.row(static_cast<Eigen::Index>(k)) = support_.row(idx[k]);
    out.weights_[static_cast<Eigen::Index>(k)] = weights_[idx[k]];
  }
  return out;
}

bool DiscreteMeasure::same_atoms(const DiscreteMeasure& other) const {
  if (size() != other.size() || dim() != other.dim()) return false;
  const auto a = canonical();
  const auto b = other.canonical();
  return a.support_ == b.support_ && a.weights_ == b.weights_;
}

bool canonical_less(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  const auto ca = a.canonical();
  const auto cb = b.canonical();
  for (Eigen::Index i = 0; i < ca.size(); ++i) {
    for (Eigen::Index c = 0; c < ca.dim(); ++c) {
      const double x = ca.support()(i, c);
      const double y = cb.support()(i, c);
      if (x != y) return x < y;
    }
    if (ca.weights()[i] != cb.weights()[i]) return ca.weights()[i] < cb.weights()[i];
  }
  return false;
}

double total_variation(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  return 0.5 * (a - b).cwiseAbs().sum();
}

void write_measure_csv(std::ostream& os, const DiscreteMeasure& mu) {
  for (Eigen::Index c = 0; c < mu.dim(); ++c) os << "coord_" << c << ',';
  os << "weight\n";
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    for (Eigen::Index c = 0; c < mu.dim(); ++c) os << fmt::format("{:.17g},", mu.support()(i, c));
    os << fmt::format("{:.17g}\n", mu.weights()[i]);
  }
}

DiscreteMeasure read_measure_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("measure csv: missing header");
  const auto cols = std::count(line.begin(), line.end(), ',') + 1;
  if (cols < 2) throw std::invalid_argument("measure csv: need at least one coordinate column");

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Eigen::Index n = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++n;
    }
    if (n != cols) {
      throw std::invalid_argument(fmt::format("measure csv: row {} has {} fields, expected {}",
                                              rows + 2, n, cols));
    }
    ++rows;
  }
  Matrix support(rows, cols - 1);
  Vector weights(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c + 1 < cols; ++c) support(i, c) = values[static_cast<std::size_t>(i * cols + c)];
    weights[i] = values[static_cast<std::size_t>(i * cols + cols - 1)];
  }
  return {std::move(support), std::move(weights)};
}

}  // namespace wbc::ot
