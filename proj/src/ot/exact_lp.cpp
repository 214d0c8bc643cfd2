#include "wbc/ot/exact_lp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include <fmt/format.h>

namespace wbc::ot {

namespace {

class TransportSimplex {
 public:
  TransportSimplex(Vector a, Vector b, Matrix cost)
      : m_(a.size()), n_(b.size()), a_(std::move(a)), b_(std::move(b)), cost_(std::move(cost)),
        flow_(Matrix::Zero(m_, n_)), basic_(m_ * n_, false) {
    b_ *= a_.sum() / b_.sum();
    tol_ = 1e-12 * std::max(1.0, cost_.cwiseAbs().maxCoeff());
  }

  int solve() {
    north_west_corner();
    const int max_pivots = 50 * static_cast<int>(m_ * n_) + 100;
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      Eigen::Index ei = -1, ej = -1;
      for (Eigen::Index i = 0; i < m_ && ei < 0; ++i) {
        for (Eigen::Index j = 0; j < n_; ++j) {
          if (!is_basic(i, j) && cost_(i, j) - u_[i] - v_[j] < -tol_) {
            ei = i;
            ej = j;
            break;
          }
        }
      }
      if (ei < 0) return pivot;
      exchange(ei, ej);
    }
    throw ConvergenceError("exact_ot_lp: pivot limit reached", 0.0, max_pivots);
  }

  const Matrix& flow() const { return flow_; }

 private:
  bool is_basic(Eigen::Index i, Eigen::Index j) const { return basic_[static_cast<std::size_t>(i * n_ + j)]; }
  void set_basic(Eigen::Index i, Eigen::Index j, bool on) { basic_[static_cast<std::size_t>(i * n_ + j)] = on; }

  void north_west_corner() {
    Eigen::Index i = 0, j = 0;
    double ra = a_[0], rb = b_[0];
    while (true) {
      const double x = std::min(ra, rb);
      flow_(i, j) = x;
      set_basic(i, j, true);
      ra -= x;
      rb -= x;
      if (i == m_ - 1 && j == n_ - 1) break;
      // On a tie advance the row; the next cell then carries a degenerate zero.
      if (j == n_ - 1 || (i < m_ - 1 && ra <= rb)) {
        ++i;
        ra = a_[i];
      } else {
        ++j;
        rb = b_[j];
      }
    }
  }

  // Tree nodes: rows 0..m-1, columns m..m+n-1.
  void compute_potentials() {
    u_.assign(static_cast<std::size_t>(m_), std::numeric_limits<double>::quiet_NaN());
    v_.assign(static_cast<std::size_t>(n_), std::numeric_limits<double>::quiet_NaN());
    u_[0] = 0.0;
    std::deque<Eigen::Index> queue{0};
    while (!queue.empty()) {
      const auto node = queue.front();
      queue.pop_front();
      if (node < m_) {
        for (Eigen::Index j = 0; j < n_; ++j) {
          if (is_basic(node, j) && std::isnan(v_[j])) {
            v_[j] = cost_(node, j) - u_[node];
            queue.push_back(m_ + j);
          }
        }
      } else {
        const auto j = node - m_;
        for (Eigen::Index i = 0; i < m_; ++i) {
          if (is_basic(i, j) && std::isnan(u_[i])) {
            u_[i] = cost_(i, j) - v_[j];
            queue.push_back(i);
          }
        }
      }
    }
  }

  // Path of basic cells from row node `ri` to column node `cj` in the basis tree.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> tree_path(Eigen::Index ri, Eigen::Index cj) const {
    const auto nodes = m_ + n_;
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(nodes), -1);
    std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
    std::deque<Eigen::Index> queue{ri};
    seen[static_cast<std::size_t>(ri)] = true;
    const auto target = m_ + cj;
    while (!queue.empty() && !seen[static_cast<std::size_t>(target)]) {
      const auto node = queue.front();
      queue.pop_front();
      const bool row = node < m_;
      const auto lim = row ? n_ : m_;
      for (Eigen::Index k = 0; k < lim; ++k) {
        const bool edge = row ? is_basic(node, k) : is_basic(k, node - m_);
        const auto next = row ? m_ + k : k;
        if (edge && !seen[static_cast<std::size_t>(next)]) {
          seen[static_cast<std::size_t>(next)] = true;
          parent[static_cast<std::size_t>(next)] = node;
          queue.push_back(next);
        }
      }
    }
    std::vector<std::pair<Eigen::Index, Eigen::Index>> path;
    for (auto node = target; node != ri; node = parent[static_cast<std::size_t>(node)]) {
      const auto prev = parent[static_cast<std::size_t>(node)];
      if (prev < 0) throw std::logic_error("exact_ot_lp: basis is not a spanning tree");
      path.emplace_back(node < m_ ? node : prev, node < m_ ? prev - m_ : node - m_);
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  void exchange(Eigen::Index ei, Eigen::Index ej) {
    // Cycle: +(ei,ej), then alternate -,+,... along the tree path from row ei to column ej.
    const auto path = tree_path(ei, ej);
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); k += 2) theta = std::min(theta, flow_(path[k].first, path[k].second));
    std::pair<Eigen::Index, Eigen::Index> leaving{m_, n_};
    for (std::size_t k = 0; k < path.size(); k += 2) {
      if (flow_(path[k].first, path[k].second) == theta && path[k] < leaving) leaving = path[k];
    }
    flow_(ei, ej) = theta;
    set_basic(ei, ej, true);
    for (std::size_t k = 0; k < path.size(); ++k) {
      auto& f = flow_(path[k].first, path[k].second);
      f = (k % 2 == 0) ? f - theta : f + theta;
    }
    flow_(leaving.first, leaving.second) = 0.0;
    set_basic(leaving.first, leaving.second, false);
  }

  Eigen::Index m_, n_;
  Vector a_, b_;
  Matrix cost_;
  Matrix flow_;
  std::vector<bool> basic_;
  std::vector<double> u_, v_;
  double tol_ = 0.0;
};

}  // namespace

ExactOtResult exact_ot_lp(const DiscreteMeasure& src, const DiscreteMeasure& dst, const CostMatrix& cost) {
  if (cost.rows() != src.size() || cost.cols() != dst.size()) {
    throw std::invalid_argument(fmt::format("exact_ot_lp: cost is {}x{} but measures have {} and {} atoms",
                                            cost.rows(), cost.cols(), src.size(), dst.size()));
  }
  std::vector<Eigen::Index> ks, kd;
  const auto a = src.pruned(&ks);
  const auto b = dst.pruned(&kd);
  if (a.size() > kMaxLpAtoms || b.size() > kMaxLpAtoms) {
    throw std::length_error(fmt::format("exact_ot_lp: supports of {} and {} atoms exceed the {}-atom limit",
                                        a.size(), b.size(), kMaxLpAtoms));
  }
  Matrix c(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      c(i, j) = cost.entries(ks[static_cast<std::size_t>(i)], kd[static_cast<std::size_t>(j)]);
    }
  }

  TransportSimplex lp(a.weights(), b.weights(), c);
  ExactOtResult out;
  out.pivots = lp.solve();

  Matrix gamma = Matrix::Zero(src.size(), dst.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      gamma(ks[static_cast<std::size_t>(i)], kd[static_cast<std::size_t>(j)]) = lp.flow()(i, j);
    }
  }
  out.cost = (gamma.array() * cost.entries.array()).sum();
  out.plan = CouplingPlan{std::move(gamma), src.weights(), dst.weights()};
  return out;
}

}  // namespace wbc::ot
