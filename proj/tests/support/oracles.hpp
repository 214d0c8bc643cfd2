#pragma once

// Reference computations for tests. These are deliberately naive and share no
// code with the library beyond the Matrix/Vector typedefs.

#include "wbc/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using wbc::Matrix;
using wbc::Vector;

// (||xs - ys|| + beta ||xa - ya||)^p with the first min(dim, 2) coordinates as state.
inline double ground(const Vector& x, const Vector& y, double beta, int p) {
  const auto sd = std::min<Eigen::Index>(x.size(), 2);
  double s = 0.0, a = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) (k < sd ? s : a) += (x[k] - y[k]) * (x[k] - y[k]);
  return std::pow(std::sqrt(s) + beta * std::sqrt(a), p);
}

inline Matrix costs(const Matrix& xs, const Matrix& ys, double beta, int p) {
  Matrix c(xs.rows(), ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
      c(i, j) = ground(xs.row(i).transpose(), ys.row(j).transpose(), beta, p);
    }
  }
  return c;
}

// Plain alternating scaling in log space, run for a fixed large number of sweeps.
inline Matrix sinkhorn_plan(const Vector& a, const Vector& b, const Matrix& c, double eps, int sweeps = 20000) {
  Vector f = Vector::Zero(a.size()), g = Vector::Zero(b.size());
  auto lse = [](const std::vector<double>& v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
  };
  std::vector<double> buf;
  for (int it = 0; it < sweeps; ++it) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      buf.clear();
      for (Eigen::Index j = 0; j < b.size(); ++j) buf.push_back((g[j] - c(i, j)) / eps + std::log(b[j]));
      f[i] = -eps * lse(buf);
    }
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      buf.clear();
      for (Eigen::Index i = 0; i < a.size(); ++i) buf.push_back((f[i] - c(i, j)) / eps + std::log(a[i]));
      g[j] = -eps * lse(buf);
    }
  }
  Matrix plan(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) plan(i, j) = a[i] * b[j] * std::exp((f[i] + g[j] - c(i, j)) / eps);
  }
  return plan;
}

// <gamma, C> + eps KL(gamma | a x b)
inline double entropic_objective(const Matrix& plan, const Vector& a, const Vector& b, const Matrix& c, double eps) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      const double g = plan(i, j);
      v += g * c(i, j);
      if (g > 0.0) v += eps * g * std::log(g / (a[i] * b[j]));
    }
  }
  return v;
}

// Unregularized OT between two uniform n-point measures: an optimal plan is a
// permutation, so enumerate them all.
inline double assignment_cost(const Matrix& c) {
  std::vector<int> perm(static_cast<std::size_t>(c.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += c(static_cast<Eigen::Index>(i), perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(c.rows());
}

// W_p^p on the line by the north-west corner rule on sorted atoms.
inline double ot_1d(std::vector<std::pair<double, double>> x, std::vector<std::pair<double, double>> y, int p) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double rx = x[0].second, ry = y[0].second, total = 0.0;
  while (i < x.size() && j < y.size()) {
    const double m = std::min(rx, ry);
    total += m * std::pow(std::abs(x[i].first - y[j].first), p);
    rx -= m;
    ry -= m;
    if (rx <= 1e-15 && ++i < x.size()) rx = x[i].second;
    if (ry <= 1e-15 && ++j < y.size()) ry = y[j].second;
  }
  return total;
}

// Central differences of f over every entry of `theta`.
inline Matrix central_diff(const std::function<double(const Matrix&)>& f, const Matrix& theta, double h) {
  Matrix grad(theta.rows(), theta.cols());
  Matrix t = theta;
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    for (Eigen::Index c = 0; c < theta.cols(); ++c) {
      t(r, c) = theta(r, c) + h;
      const double up = f(t);
      t(r, c) = theta(r, c) - h;
      const double down = f(t);
      t(r, c) = theta(r, c);
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

inline Vector softmax(const Eigen::RowVectorXd& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix().transpose();
  return e / e.sum();
}

inline Matrix random_points(int n, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, dim);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
  }
  return m;
}

inline Vector random_simplex(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = u(rng);
  return w / w.sum();
}

}  // namespace oracle
