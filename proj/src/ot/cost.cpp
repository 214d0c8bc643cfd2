#include "wbc/ot/cost.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace wbc::ot {

void GroundMetric::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument(fmt::format("beta must be > 0, got {}", beta));
  if (p != 1 && p != 2) throw std::invalid_argument(fmt::format("exponent p must be 1 or 2, got {}", p));
}

double ground_cost(const EmbeddedPoint& x, const EmbeddedPoint& y, double beta, int p) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument(
        fmt::format("ground_cost: dimension mismatch ({} vs {})", x.dim(), y.dim()));
  }
  GroundMetric{beta, p}.validate();
  const auto sd = std::min<Eigen::Index>(kStateDims, x.dim());
  const double ds = (x.coords.head(sd) - y.coords.head(sd)).norm();
  const double da = (x.coords.tail(x.dim() - sd) - y.coords.tail(y.dim() - sd)).norm();
  const double d = ds + beta * da;
  return p == 1 ? d : (p == 2 ? d * d : std::pow(d, p));
}

CostMatrix cost_matrix(const Matrix& src_support, const Matrix& dst_support, double beta, int p,
                       kernels::Exec exec) {
  if (src_support.cols() != dst_support.cols()) {
    throw std::invalid_argument(fmt::format("cost_matrix: dimension mismatch ({} vs {})",
                                            src_support.cols(), dst_support.cols()));
  }
  if (src_support.rows() == 0 || dst_support.rows() == 0) {
    throw std::invalid_argument("cost_matrix: empty support");
  }
  GroundMetric{beta, p}.validate();
  CostMatrix c{Matrix(), p, beta};
  kernels::pairwise_cost(src_support, dst_support, kStateDims, beta, p, c.entries, exec);
  return c;
}

CostMatrix cost_matrix(const DiscreteMeasure& src, const DiscreteMeasure& dst, double beta, int p,
                       kernels::Exec exec) {
  return cost_matrix(src.support(), dst.support(), beta, p, exec);
}

}  // namespace wbc::ot
