#include "wbc/ot/kernels.hpp"

#include "kernel_rows.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wbc::ot::kernels {

namespace omp {

void pairwise_cost(const Matrix& x, const Matrix& y, int state_dims, double beta, int p, Matrix& out) {
  out.resize(x.rows(), y.rows());
  const long rows = x.rows();
  const bool big = static_cast<long>(x.rows()) * y.rows() >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < rows; ++i) {
    detail::cost_row(x.row(i).data(), y.data(), y.rows(), x.cols(), state_dims, beta, p,
                     out.row(i).data());
  }
}

void row_logsumexp(const Matrix& m, std::span<const double> h, std::span<double> out) {
  const long rows = m.rows();
  const bool big = static_cast<long>(m.size()) >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < rows; ++i) {
    out[static_cast<std::size_t>(i)] = detail::row_lse(m.row(i).data(), h.data(), m.cols());
  }
}

void matvec(const Matrix& m, std::span<const double> v, std::span<double> out) {
  const long rows = m.rows();
  const bool big = static_cast<long>(m.size()) >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < rows; ++i) {
    out[static_cast<std::size_t>(i)] = detail::row_dot(m.row(i).data(), v.data(), m.cols());
  }
}

}  // namespace omp

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace wbc::ot::kernels
