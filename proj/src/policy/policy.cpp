#include "wbc/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

namespace wbc::policy {

void ObsDiscretizer::validate() const {
  if (resolution < 1) throw std::invalid_argument("grid resolution must be >= 1");
  if (!(own_range > 0.0) || !(other_range > 0.0)) throw std::invalid_argument("offset ranges must be > 0");
}

int ObsDiscretizer::bin(double x, double range) const {
  const double t = (x + range) / (2.0 * range) * resolution;
  const int b = static_cast<int>(std::floor(t));
  return std::clamp(b, 0, resolution - 1);
}

CellId ObsDiscretizer::cell_from_offsets(const Eigen::Vector2d& own_offset,
                                         const Eigen::Vector2d& other_offset) const {
  const int own = bin(own_offset.x(), own_range) + resolution * bin(own_offset.y(), own_range);
  const int other = bin(other_offset.x(), other_range) + resolution * bin(other_offset.y(), other_range);
  return own * resolution * resolution + other;
}

CellId ObsDiscretizer::cell(const Vector& obs) const {
  if (obs.size() < 6 || obs.size() % 2 != 0) {
    throw std::invalid_argument(fmt::format("discretize: observation of size {} has no other-agent block", obs.size()));
  }
  const Eigen::Vector2d self = obs.segment<2>(0);
  const Eigen::Vector2d own = self - obs.segment<2>(2);
  Eigen::Vector2d nearest = obs.segment<2>(4) - self;
  for (Eigen::Index k = 6; k + 1 < obs.size(); k += 2) {
    const Eigen::Vector2d d = obs.segment<2>(k) - self;
    if (d.norm() < nearest.norm()) nearest = d;
  }
  return cell_from_offsets(own, nearest);
}

SoftmaxPolicy::SoftmaxPolicy(int n_cells, int agent_id)
    : logits_(Matrix::Zero(n_cells, kNumActions)), agent_id_(agent_id) {
  if (n_cells < 1) throw std::invalid_argument("policy needs at least one cell");
}

void SoftmaxPolicy::check_cell(CellId cell) const {
  if (cell < 0 || cell >= n_cells()) {
    throw std::out_of_range(fmt::format("cell {} outside [0, {})", cell, n_cells()));
  }
}

ActionProbs SoftmaxPolicy::action_probs(CellId cell) const {
  check_cell(cell);
  const ActionProbs z = logits_.row(cell).transpose();
  const ActionProbs e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

Action SoftmaxPolicy::sample_action(CellId cell, std::mt19937_64& rng) const {
  const ActionProbs p = action_probs(cell);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int a = 0; a < kNumActions - 1; ++a) {
    acc += p[a];
    if (u < acc) return static_cast<Action>(a);
  }
  return static_cast<Action>(kNumActions - 1);
}

Action SoftmaxPolicy::argmax_action(CellId cell) const {
  check_cell(cell);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (logits_(cell, a) > logits_(cell, best)) best = a;
  }
  return static_cast<Action>(best);
}

void SoftmaxPolicy::accumulate_log_prob_grad(PolicyGradient& grad, CellId cell, Action action,
                                             double scale) const {
  const ActionProbs p = action_probs(cell);
  for (int a = 0; a < kNumActions; ++a) {
    grad(cell, a) += scale * ((a == static_cast<int>(action) ? 1.0 : 0.0) - p[a]);
  }
}

PolicyGradient SoftmaxPolicy::log_prob_grad(CellId cell, Action action) const {
  PolicyGradient g = zero_gradient();
  accumulate_log_prob_grad(g, cell, action, 1.0);
  return g;
}

std::pair<double, PolicyGradient> SoftmaxPolicy::kl_to_reference(const Matrix& reference,
                                                                 std::span<const CellId> cells) const {
  if (reference.rows() != n_cells() || reference.cols() != kNumActions) {
    throw std::invalid_argument("kl_to_reference: reference table has the wrong shape");
  }
  PolicyGradient grad = zero_gradient();
  if (cells.empty()) return {0.0, grad};
  double total = 0.0;
  const double w = 1.0 / static_cast<double>(cells.size());
  for (const CellId c : cells) {
    check_cell(c);
    const ActionProbs r = reference.row(c).transpose();
    if ((r.array() <= 0.0).any()) {
      throw std::invalid_argument(fmt::format("kl_to_reference: reference row {} has a zero entry", c));
    }
    const ActionProbs p = action_probs(c);
    const ActionProbs log_ratio = p.array().log() - r.array().log();
    const double kl = p.dot(log_ratio);
    total += w * kl;
    // d KL / d z_k = p_k (log(p_k / r_k) - KL)
    grad.row(c) += w * (p.array() * (log_ratio.array() - kl)).matrix().transpose();
  }
  return {total, grad};
}

void SoftmaxPolicy::write_csv(std::ostream& os) const {
  os << "cell,action,logit\n";
  for (int c = 0; c < n_cells(); ++c) {
    for (int a = 0; a < kNumActions; ++a) os << fmt::format("{},{},{:.17g}\n", c, a, logits_(c, a));
  }
}

SoftmaxPolicy SoftmaxPolicy::read_csv(std::istream& is, int agent_id) {
  std::string line;
  if (!std::getline(is, line) || line != "cell,action,logit") {
    throw std::invalid_argument("policy csv: expected header cell,action,logit");
  }
  std::vector<std::tuple<int, int, double>> rows;
  int max_cell = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string c, a, z;
    if (!std::getline(ss, c, ',') || !std::getline(ss, a, ',') || !std::getline(ss, z)) {
      throw std::invalid_argument(fmt::format("policy csv: malformed row '{}'", line));
    }
    rows.emplace_back(std::stoi(c), std::stoi(a), std::stod(z));
    max_cell = std::max(max_cell, std::get<0>(rows.back()));
  }
  SoftmaxPolicy p(max_cell + 1, agent_id);
  for (const auto& [c, a, z] : rows) {
    if (a < 0 || a >= kNumActions || c < 0) throw std::invalid_argument("policy csv: index out of range");
    p.logits_(c, a) = z;
  }
  return p;
}

}  // namespace wbc::policy
