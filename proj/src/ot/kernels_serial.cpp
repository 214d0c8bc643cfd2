#include "wbc/ot/kernels.hpp"

#include "kernel_rows.hpp"

namespace wbc::ot::kernels::serial {

void pairwise_cost(const Matrix& x, const Matrix& y, int state_dims, double beta, int p, Matrix& out) {
  out.resize(x.rows(), y.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    detail::cost_row(x.row(i).data(), y.data(), y.rows(), x.cols(), state_dims, beta, p,
                     out.row(i).data());
  }
}

void row_logsumexp(const Matrix& m, std::span<const double> h, std::span<double> out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = detail::row_lse(m.row(i).data(), h.data(), m.cols());
  }
}

void matvec(const Matrix& m, std::span<const double> v, std::span<double> out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = detail::row_dot(m.row(i).data(), v.data(), m.cols());
  }
}

}  // namespace wbc::ot::kernels::serial
