#pragma once

// Per-row bodies shared by the serial and OpenMP kernels so both paths run
// identical arithmetic.

#include <algorithm>
#include <cmath>
#include <limits>

namespace wbc::ot::kernels::detail {

inline double raise(double d, int p) {
  if (p == 1) return d;
  if (p == 2) return d * d;
  return std::pow(d, p);
}

inline void cost_row(const double* x, const double* y_rows, long n_cols, long dim, int state_dims,
                     double beta, int p, double* out) {
  const long sd = std::min<long>(state_dims, dim);
  for (long j = 0; j < n_cols; ++j) {
    const double* y = y_rows + j * dim;
    double s2 = 0.0;
    for (long c = 0; c < sd; ++c) {
      const double t = x[c] - y[c];
      s2 += t * t;
    }
    double a2 = 0.0;
    for (long c = sd; c < dim; ++c) {
      const double t = x[c] - y[c];
      a2 += t * t;
    }
    out[j] = raise(std::sqrt(s2) + beta * std::sqrt(a2), p);
  }
}

inline double row_lse(const double* m, const double* h, long n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (long j = 0; j < n; ++j) mx = std::max(mx, m[j] + h[j]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (long j = 0; j < n; ++j) s += std::exp(m[j] + h[j] - mx);
  return mx + std::log(s);
}

inline double row_dot(const double* m, const double* v, long n) {
  double s = 0.0;
  for (long j = 0; j < n; ++j) s += m[j] * v[j];
  return s;
}

}  // namespace wbc::ot::kernels::detail
