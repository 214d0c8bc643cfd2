#pragma once

// Dense inner loops shared by the Sinkhorn and barycenter solvers.
//
// Every kernel exists twice: a plain serial reference and an OpenMP version
// that splits the outer (row) loop across threads. Each output element is
// reduced by a single thread in the same order as the serial loop, so the two
// paths agree bit for bit and results do not depend on the thread count.

#include "wbc/common.hpp"

#include <span>

namespace wbc::ot::kernels {

enum class Exec { serial, parallel };

/// Below this many matrix entries the parallel path runs on one thread.
inline constexpr long kParallelThreshold = 1L << 14;

namespace serial {

/// out(i,j) = (||x_s - y_s|| + beta ||x_a - y_a||)^p with the state block
/// being the first `state_dims` columns.
void pairwise_cost(const Matrix& x, const Matrix& y, int state_dims, double beta, int p, Matrix& out);

/// out_i = log sum_j exp(m(i,j) + h_j)
void row_logsumexp(const Matrix& m, std::span<const double> h, std::span<double> out);

/// out = m v
void matvec(const Matrix& m, std::span<const double> v, std::span<double> out);

}  // namespace serial

namespace omp {

void pairwise_cost(const Matrix& x, const Matrix& y, int state_dims, double beta, int p, Matrix& out);
void row_logsumexp(const Matrix& m, std::span<const double> h, std::span<double> out);
void matvec(const Matrix& m, std::span<const double> v, std::span<double> out);

}  // namespace omp

inline void pairwise_cost(const Matrix& x, const Matrix& y, int state_dims, double beta, int p,
                          Matrix& out, Exec exec) {
  exec == Exec::serial ? serial::pairwise_cost(x, y, state_dims, beta, p, out)
                       : omp::pairwise_cost(x, y, state_dims, beta, p, out);
}

inline void row_logsumexp(const Matrix& m, std::span<const double> h, std::span<double> out,
                          Exec exec) {
  exec == Exec::serial ? serial::row_logsumexp(m, h, out) : omp::row_logsumexp(m, h, out);
}

inline void matvec(const Matrix& m, std::span<const double> v, std::span<double> out, Exec exec) {
  exec == Exec::serial ? serial::matvec(m, v, out) : omp::matvec(m, v, out);
}

/// Number of threads the parallel path may use.
int max_threads();

}  // namespace wbc::ot::kernels
