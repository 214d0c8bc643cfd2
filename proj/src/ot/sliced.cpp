#include "wbc/ot/sliced.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <fmt/format.h>

namespace wbc::ot {

namespace {

struct Atom {
  double x;
  double w;
};

std::vector<Atom> sorted_atoms(std::span<const double> x, std::span<const double> w) {
  std::vector<Atom> atoms;
  atoms.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) atoms.push_back({x[i], w[i]});
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.x != b.x ? a.x < b.x : a.w < b.w; });
  return atoms;
}

}  // namespace

double wasserstein_1d(std::span<const double> x, std::span<const double> wx, std::span<const double> y,
                      std::span<const double> wy, int p) {
  if (x.size() != wx.size() || y.size() != wy.size()) {
    throw std::invalid_argument("wasserstein_1d: values and weights differ in length");
  }
  const auto a = sorted_atoms(x, wx);
  const auto b = sorted_atoms(y, wy);
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty measure");

  std::size_t i = 0, j = 0;
  double ra = a[0].w, rb = b[0].w;
  double total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double mass = std::min(ra, rb);
    const double d = std::abs(a[i].x - b[j].x);
    total += mass * (p == 1 ? d : (p == 2 ? d * d : std::pow(d, p)));
    ra -= mass;
    rb -= mass;
    // Advance whichever side is exhausted; guard against rounding residue.
    if (ra <= 1e-15) {
      if (++i < a.size()) ra = a[i].w;
    }
    if (rb <= 1e-15) {
      if (++j < b.size()) rb = b[j].w;
    }
  }
  return total;
}

double sliced_wasserstein(const DiscreteMeasure& src, const DiscreteMeasure& dst, int n_projections,
                          int p, Seed seed) {
  if (n_projections < 1) throw std::invalid_argument("sliced_wasserstein: n_projections must be >= 1");
  if (src.dim() != dst.dim()) {
    throw std::invalid_argument(
        fmt::format("sliced_wasserstein: dimension mismatch ({} vs {})", src.dim(), dst.dim()));
  }
  if (p != 1 && p != 2) throw std::invalid_argument("sliced_wasserstein: p must be 1 or 2");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = src.dim();
  std::vector<double> wx(src.weights().data(), src.weights().data() + src.size());
  std::vector<double> wy(dst.weights().data(), dst.weights().data() + dst.size());
  std::vector<double> px(static_cast<std::size_t>(src.size()));
  std::vector<double> py(static_cast<std::size_t>(dst.size()));

  double acc = 0.0;
  for (int k = 0; k < n_projections; ++k) {
    Vector theta(d);
    do {
      for (Eigen::Index c = 0; c < d; ++c) theta[c] = normal(rng);
    } while (theta.norm() == 0.0);
    theta /= theta.norm();
    for (Eigen::Index i = 0; i < src.size(); ++i) px[static_cast<std::size_t>(i)] = src.support().row(i).dot(theta);
    for (Eigen::Index i = 0; i < dst.size(); ++i) py[static_cast<std::size_t>(i)] = dst.support().row(i).dot(theta);
    acc += wasserstein_1d(px, wx, py, wy, p);
  }
  return acc / static_cast<double>(n_projections);
}

}  // namespace wbc::ot
