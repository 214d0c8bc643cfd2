#include "wbc/ot/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace wbc::ot {

namespace {

std::span<const double> cspan(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> mspan(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Sum of gamma_ij (C_ij + eps log(gamma_ij / (a_i b_j))) over positive entries.
double entropic_objective(const Matrix& gamma, const Matrix& cost, const Vector& a, const Vector& b,
                          double eps) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
    const double la = std::log(a[i]);
    for (Eigen::Index j = 0; j < gamma.cols(); ++j) {
      const double g = gamma(i, j);
      if (g > 0.0) total += g * (cost(i, j) + eps * (std::log(g) - la - std::log(b[j])));
    }
  }
  return total;
}

SinkhornResult finish(Matrix gamma, const Vector& a, const Vector& b, const Matrix& cost,
                      const SinkhornConfig& cfg, int iterations, double residual, bool log_domain) {
  SinkhornResult r;
  r.cost = (gamma.array() * cost.array()).sum();
  r.entropic_objective = entropic_objective(gamma, cost, a, b, cfg.epsilon);
  r.plan = CouplingPlan{std::move(gamma), a, b};
  r.iterations = iterations;
  r.residual = residual;
  r.log_domain = log_domain;
  return r;
}

Matrix log_plan(const Vector& alpha, const Matrix& scaled, const Vector& beta) {
  Matrix gamma(scaled.rows(), scaled.cols());
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) gamma(i, j) = std::exp(alpha[i] + scaled(i, j) + beta[j]);
  }
  return gamma;
}

// Newton ascent on the dual F(alpha, beta) = <a, alpha> + <b, beta> - sum gamma
// with gamma_ij = exp(alpha_i + S_ij + beta_j), S = -C/eps, started from the
// scaling iterate. Before every step beta is projected exactly, so the
// stopping rule is the same row-marginal L1 test as the scaling loop.
SinkhornResult solve_newton(const Vector& a, const Vector& b, const Matrix& cost, const Matrix& scaled,
                            Vector alpha, const SinkhornConfig& cfg, int first_iter) {
  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();
  const Matrix scaled_t = scaled.transpose();
  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();
  Vector beta(m), lse_m(m), lse_n(n);
  // The Hessian is singular along (1, -1); pinning the last column potential
  // removes that direction.
  const Eigen::Index dim = n + m - 1;
  Matrix hess(dim, dim);
  Vector grad(dim);

  auto dual = [&](const Vector& al, const Vector& be) {
    return a.dot(al) + b.dot(be) - log_plan(al, scaled, be).sum();
  };

  double residual = std::numeric_limits<double>::infinity();
  for (int it = first_iter; it <= cfg.max_iters; ++it) {
    kernels::row_logsumexp(scaled_t, cspan(alpha), mspan(lse_m), cfg.exec);
    beta = log_b - lse_m;
    Matrix gamma = log_plan(alpha, scaled, beta);
    const Vector rows = gamma.rowwise().sum();
    residual = (rows - a).cwiseAbs().sum();
    if (!std::isfinite(residual)) {
      throw ConvergenceError("sinkhorn: non-finite potentials in Newton phase", residual, it);
    }
    if (residual <= cfg.tol) return finish(std::move(gamma), a, b, cost, cfg, it, residual, true);

    const Vector cols = gamma.colwise().sum().transpose();
    hess.setZero();
    hess.topLeftCorner(n, n).diagonal() = rows;
    hess.topRightCorner(n, m - 1) = gamma.leftCols(m - 1);
    hess.bottomLeftCorner(m - 1, n) = gamma.leftCols(m - 1).transpose();
    hess.bottomRightCorner(m - 1, m - 1).diagonal() = cols.head(m - 1);
    grad.head(n) = a - rows;
    grad.tail(m - 1) = b.head(m - 1) - cols.head(m - 1);
    const Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;

    Vector d_beta = Vector::Zero(m);
    d_beta.head(m - 1) = step.tail(m - 1);
    const double f0 = dual(alpha, beta);
    const double slope = grad.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40 && slope > 0.0; ++ls, t *= 0.5) {
      accepted = dual(alpha + t * step.head(n), beta + t * d_beta) >= f0 + 1e-4 * t * slope;
      if (accepted) break;
    }
    if (accepted) {
      alpha += t * step.head(n);
    } else {
      // Ill-conditioned Hessian (nearly empty rows): a scaling step still
      // increases the dual.
      kernels::row_logsumexp(scaled, cspan(beta), mspan(lse_n), cfg.exec);
      alpha = log_a - lse_n;
    }
  }
  throw ConvergenceError(
      fmt::format("sinkhorn: no convergence in {} iterations (residual {:.3e})", cfg.max_iters, residual),
      residual, cfg.max_iters);
}

SinkhornResult solve_log(const Vector& a, const Vector& b, const Matrix& cost,
                         const SinkhornConfig& cfg) {
  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();
  const Matrix scaled = -cost / cfg.epsilon;
  const Matrix scaled_t = scaled.transpose();
  const Vector log_a = a.array().log();
  const Vector log_b = b.array().log();

  Vector alpha(n), alpha_next(n), beta = Vector::Zero(m), lse_n(n), lse_m(m);
  kernels::row_logsumexp(scaled, cspan(beta), mspan(lse_n), cfg.exec);
  alpha = log_a - lse_n;

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (cfg.newton_after >= 0 && it > cfg.newton_after) return solve_newton(a, b, cost, scaled, alpha, cfg, it);
    kernels::row_logsumexp(scaled_t, cspan(alpha), mspan(lse_m), cfg.exec);
    beta = log_b - lse_m;
    kernels::row_logsumexp(scaled, cspan(beta), mspan(lse_n), cfg.exec);
    alpha_next = log_a - lse_n;
    // Rows of the (alpha, beta) plan sum to a * exp(alpha - alpha_next);
    // its columns match b exactly.
    residual = (a.array() * ((alpha - alpha_next).array().exp() - 1.0).abs()).sum();
    if (!std::isfinite(residual)) {
      throw ConvergenceError("sinkhorn: non-finite potentials in log domain", residual, it);
    }
    if (residual <= cfg.tol) {
      return finish(log_plan(alpha, scaled, beta), a, b, cost, cfg, it, residual, true);
    }
    alpha.swap(alpha_next);
  }
  throw ConvergenceError(
      fmt::format("sinkhorn: no convergence in {} iterations (residual {:.3e})", cfg.max_iters, residual),
      residual, cfg.max_iters);
}

// Self-transport OT(a, a): the optimal plan is symmetric, so one potential
// suffices. The averaged update phi <- (phi + T phi) / 2 converges in a few
// dozen steps where alternating scaling needs thousands.
SinkhornResult solve_symmetric(const Vector& a, const Matrix& cost, const SinkhornConfig& cfg) {
  const Eigen::Index n = a.size();
  const Matrix scaled = -cost / cfg.epsilon;
  const Vector log_a = a.array().log();
  Vector phi = Vector::Zero(n), h(n), lse(n);

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    h = log_a + phi;
    kernels::row_logsumexp(scaled, cspan(h), mspan(lse), cfg.exec);
    // Row i of the phi-plan sums to a_i exp(phi_i - T(phi)_i) with T(phi) = -lse.
    residual = (a.array() * ((phi + lse).array().exp() - 1.0).abs()).sum();
    if (!std::isfinite(residual)) {
      throw ConvergenceError("sinkhorn: non-finite symmetric potential", residual, it);
    }
    if (residual <= cfg.tol) {
      Matrix gamma(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) gamma(i, j) = std::exp(h[i] + scaled(i, j) + h[j]);
      }
      return finish(std::move(gamma), a, a, cost, cfg, it, residual, true);
    }
    phi = 0.5 * (phi - lse);
  }
  throw ConvergenceError(
      fmt::format("sinkhorn: no convergence in {} iterations (residual {:.3e})", cfg.max_iters, residual),
      residual, cfg.max_iters);
}

void check_kernel_product(const Vector& kv, const char* side) {
  for (Eigen::Index i = 0; i < kv.size(); ++i) {
    if (!(kv[i] > 0.0) || !std::isfinite(kv[i])) {
      throw KernelUnderflowError(fmt::format(
          "sinkhorn: kernel exp(-D/eps) lost {} {} to underflow; use the log-domain solver "
          "(SinkhornDomain::log) or a larger epsilon",
          side, i));
    }
  }
}

SinkhornResult solve_kernel(const Vector& a, const Vector& b, const Matrix& cost,
                            const SinkhornConfig& cfg) {
  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();
  // Scalar exp: Eigen's vectorized exp clamps large negative arguments to a
  // tiny positive value, which would hide underflow.
  const Matrix kernel = (-cost / cfg.epsilon).unaryExpr([](double x) { return std::exp(x); });
  const Matrix kernel_t = kernel.transpose();

  Vector u(n), u_next(n), v = Vector::Ones(m), kv(n), ktu(m);
  kernels::matvec(kernel, cspan(v), mspan(kv), cfg.exec);
  check_kernel_product(kv, "row");
  u = a.cwiseQuotient(kv);

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (cfg.newton_after >= 0 && it > cfg.newton_after) {
      return solve_newton(a, b, cost, Matrix(-cost / cfg.epsilon), u.array().log(), cfg, it);
    }
    kernels::matvec(kernel_t, cspan(u), mspan(ktu), cfg.exec);
    check_kernel_product(ktu, "column");
    v = b.cwiseQuotient(ktu);
    kernels::matvec(kernel, cspan(v), mspan(kv), cfg.exec);
    check_kernel_product(kv, "row");
    u_next = a.cwiseQuotient(kv);
    residual = (a.array() * (u.array() / u_next.array() - 1.0).abs()).sum();
    if (!std::isfinite(residual)) {
      throw KernelUnderflowError("sinkhorn: kernel scalings overflowed; use the log-domain solver");
    }
    if (residual <= cfg.tol) {
      Matrix gamma = u.asDiagonal() * kernel * v.asDiagonal();
      return finish(std::move(gamma), a, b, cost, cfg, it, residual, false);
    }
    u.swap(u_next);
  }
  throw ConvergenceError(
      fmt::format("sinkhorn: no convergence in {} iterations (residual {:.3e})", cfg.max_iters, residual),
      residual, cfg.max_iters);
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument(fmt::format("epsilon must be > 0, got {}", epsilon));
  if (!(tol > 0.0)) throw std::invalid_argument(fmt::format("tol must be > 0, got {}", tol));
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (p != 1 && p != 2) throw std::invalid_argument(fmt::format("exponent p must be 1 or 2, got {}", p));
}

bool uses_log_domain(const SinkhornConfig& cfg, double max_cost) {
  switch (cfg.domain) {
    case SinkhornDomain::kernel: return false;
    case SinkhornDomain::log: return true;
    case SinkhornDomain::automatic: break;
  }
  return cfg.epsilon < kLogDomainRatio * max_cost;
}

double CouplingPlan::marginal_residual() const {
  const double rows = (gamma.rowwise().sum() - source_marginal).cwiseAbs().sum();
  const double cols = (gamma.colwise().sum().transpose() - target_marginal).cwiseAbs().sum();
  return std::max(rows, cols);
}

SinkhornResult sinkhorn_scaling(const Vector& a, const Vector& b, const Matrix& cost,
                                const SinkhornConfig& cfg) {
  cfg.validate();
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw std::invalid_argument("sinkhorn: cost shape does not match marginals");
  }
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("sinkhorn: empty marginal");
  if ((a.array() <= 0.0).any() || (b.array() <= 0.0).any()) {
    throw std::invalid_argument("sinkhorn: marginals must be strictly positive (prune zeros first)");
  }
  return uses_log_domain(cfg, cost.maxCoeff()) ? solve_log(a, b, cost, cfg)
                                               : solve_kernel(a, b, cost, cfg);
}

SinkhornResult sinkhorn_ot(const DiscreteMeasure& src, const DiscreteMeasure& dst,
                           const SinkhornConfig& cfg, double beta) {
  if (src.dim() != dst.dim()) {
    throw std::invalid_argument(
        fmt::format("sinkhorn_ot: dimension mismatch ({} vs {})", src.dim(), dst.dim()));
  }
  std::vector<Eigen::Index> kept_src, kept_dst, order_src, order_dst;
  const auto a = src.pruned(&kept_src).canonical(&order_src);
  const auto b = dst.pruned(&kept_dst).canonical(&order_dst);
  const auto cost = cost_matrix(a, b, beta, cfg.p, cfg.exec);

  SinkhornResult r;
  if (a.same_atoms(b)) {
    cfg.validate();
    r = solve_symmetric(a.weights(), cost.entries, cfg);
  } else {
    r = sinkhorn_scaling(a.weights(), b.weights(), cost.entries, cfg);
  }

  // Scatter back to the callers' atom order.
  Matrix gamma = Matrix::Zero(src.size(), dst.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto oi = kept_src[static_cast<std::size_t>(order_src[static_cast<std::size_t>(i)])];
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const auto oj = kept_dst[static_cast<std::size_t>(order_dst[static_cast<std::size_t>(j)])];
      gamma(oi, oj) = r.plan.gamma(i, j);
    }
  }
  r.plan = CouplingPlan{std::move(gamma), src.weights(), dst.weights()};
  return r;
}

double self_transport(const DiscreteMeasure& mu, const SinkhornConfig& cfg, double beta) {
  return sinkhorn_ot(mu, mu, cfg, beta).entropic_objective;
}

namespace {

double cross_term(const DiscreteMeasure& x, const DiscreteMeasure& y, const SinkhornConfig& cfg,
                  double beta) {
  // Solve in a canonical argument order so the result is exactly symmetric.
  return canonical_less(y, x) ? sinkhorn_ot(y, x, cfg, beta).entropic_objective
                              : sinkhorn_ot(x, y, cfg, beta).entropic_objective;
}

double combine(double cross, double self_x, double self_y, bool debias) {
  return debias ? cross - 0.5 * (self_x + self_y) : cross;
}

}  // namespace

double sinkhorn_divergence(const DiscreteMeasure& src, const DiscreteMeasure& dst,
                           const SinkhornConfig& cfg, double beta) {
  const double cross = cross_term(src, dst, cfg, beta);
  if (!cfg.debias) return cross;
  // Order the self terms canonically too so the sum is symmetric bit for bit.
  const bool swap = canonical_less(dst, src);
  const double sx = self_transport(swap ? dst : src, cfg, beta);
  const double sy = self_transport(swap ? src : dst, cfg, beta);
  return combine(cross, sx, sy, true);
}

Matrix pairwise_divergence_matrix(std::span<const DiscreteMeasure> measures,
                                  const SinkhornConfig& cfg, double beta,
                                  std::vector<double>* self_terms) {
  const auto n = static_cast<Eigen::Index>(measures.size());
  if (n < 2) throw std::invalid_argument("pairwise_divergence_matrix: need at least two measures");

  std::vector<double> self(measures.size(), 0.0);
  if (cfg.debias) {
    for (std::size_t i = 0; i < measures.size(); ++i) self[i] = self_transport(measures[i], cfg, beta);
  }
  if (self_terms) *self_terms = self;
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& x = measures[static_cast<std::size_t>(i)];
      const auto& y = measures[static_cast<std::size_t>(j)];
      const double cross = cross_term(x, y, cfg, beta);
      const bool swap = canonical_less(y, x);
      const double sx = self[static_cast<std::size_t>(swap ? j : i)];
      const double sy = self[static_cast<std::size_t>(swap ? i : j)];
      out(i, j) = out(j, i) = combine(cross, sx, sy, cfg.debias);
    }
  }
  return out;
}

double max_pairwise(const Matrix& divergences) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < divergences.rows(); ++i) {
    for (Eigen::Index j = 0; j < divergences.cols(); ++j) {
      if (i != j) best = std::max(best, divergences(i, j));
    }
  }
  return best;
}

}  // namespace wbc::ot
