#pragma once

#include "wbc/ot/kernels.hpp"
#include "wbc/ot/measure.hpp"

namespace wbc::ot {

/// Ground metric d((s,a),(s',a')) = ||s-s'|| + beta ||a-a'||, raised to p.
/// The first min(dim, kStateDims) coordinates are treated as state.
struct GroundMetric {
  double beta = 0.8;
  int p = 2;

  void validate() const;
};

double ground_cost(const EmbeddedPoint& x, const EmbeddedPoint& y, double beta, int p);

/// Dense transport cost between two supports.
struct CostMatrix {
  Matrix entries;
  int p = 2;
  double beta = 0.8;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
  double max() const { return entries.size() ? entries.maxCoeff() : 0.0; }
};

CostMatrix cost_matrix(const DiscreteMeasure& src, const DiscreteMeasure& dst, double beta, int p,
                       kernels::Exec exec = kernels::Exec::parallel);
CostMatrix cost_matrix(const Matrix& src_support, const Matrix& dst_support, double beta, int p,
                       kernels::Exec exec = kernels::Exec::parallel);

}  // namespace wbc::ot
