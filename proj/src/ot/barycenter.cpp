#include "wbc/ot/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace wbc::ot {

namespace {

std::span<const double> cspan(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> mspan(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double log_sum_exp(const Vector& x) {
  const double mx = x.maxCoeff();
  return mx + std::log((x.array() - mx).exp().sum());
}

// One input measure's state. `fwd` is (n_i x m); `bwd` is its transpose. In
// log mode they hold -C/eps, otherwise exp(-C/eps).
struct Problem {
  Vector a;
  Vector log_a;
  Matrix fwd;
  Matrix bwd;
  Vector u;  // log u in log mode
  Vector v;  // log v in log mode
  Vector q;  // K^T u (log in log mode)
  Vector scratch;
};

void check_positive(const Vector& x, const char* what) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !std::isfinite(x[i])) {
      throw KernelUnderflowError(fmt::format(
          "barycenter: kernel {} lost entry {} to underflow; use the log-domain solver", what, i));
    }
  }
}

Vector unsorted_weights(const Vector& log_b, const std::vector<Eigen::Index>& order) {
  Vector w(log_b.size());
  for (Eigen::Index k = 0; k < log_b.size(); ++k) w[order[static_cast<std::size_t>(k)]] = std::exp(log_b[k]);
  return w;
}

// Newton ascent on the barycenter semi-dual
//   max  -(1/N) sum_i <a_i, LSE_k(L_i,jk + log eta_k + g_i,k)>  s.t.  sum_i g_i = 0
// with L_i = -C_i/eps, parameterized by g_0..g_{N-2}. Its fixed point is the
// IBP fixed point; `log_v` (log IBP column scalings, log v_i = log eta + g_i)
// is read as the start and overwritten with the result. Returns steps taken.
int newton_refine(const std::vector<Matrix>& log_kernels, const std::vector<Vector>& weights, const Vector& log_eta,
                  std::vector<Vector>& log_v, double tol, int max_steps, kernels::Exec exec) {
  const auto n = log_kernels.size();
  const Eigen::Index m = log_eta.size();
  const double w = 1.0 / static_cast<double>(n);
  const auto free = static_cast<Eigen::Index>(n - 1);

  std::vector<Vector> g(n);
  Vector mean = Vector::Zero(m);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = log_v[i] - log_eta;
    mean += w * g[i];
  }
  for (auto& gi : g) gi -= mean;

  struct Eval {
    double value = 0.0;
    std::vector<Matrix> gamma;
    std::vector<Vector> cols;
  };
  auto evaluate = [&](const std::vector<Vector>& gs, bool plans) {
    Eval e;
    for (std::size_t i = 0; i < n; ++i) {
      const Vector h = log_eta + gs[i];
      Vector lse(log_kernels[i].rows());
      kernels::row_logsumexp(log_kernels[i], cspan(h), mspan(lse), exec);
      e.value -= w * weights[i].dot(lse);
      if (!plans) continue;
      Matrix gam = (log_kernels[i].rowwise() + h.transpose()).colwise() - lse;
      gam = gam.array().exp().matrix();
      gam = weights[i].asDiagonal() * gam;
      e.cols.push_back(gam.colwise().sum().transpose());
      e.gamma.push_back(std::move(gam));
    }
    return e;
  };

  const Eigen::Index dim = free * m;
  Matrix hess(dim, dim);
  Vector grad(dim);
  int steps = 0;
  for (; steps < max_steps; ++steps) {
    const Eval e = evaluate(g, true);
    Vector avg = Vector::Zero(m);
    for (const auto& c : e.cols) avg += w * c;
    double spread = 0.0;
    for (const auto& c : e.cols) spread = std::max(spread, (c - avg).cwiseAbs().sum());
    if (!std::isfinite(spread)) break;
    if (spread <= tol) break;

    // Curvature of -<a, LSE(.)> in g_i is -(diag(c_i) - gamma_i^T diag(1/a_i) gamma_i).
    std::vector<Matrix> curv(n);
    for (std::size_t i = 0; i < n; ++i) {
      curv[i] = -(e.gamma[i].transpose() * weights[i].cwiseInverse().asDiagonal() * e.gamma[i]);
      curv[i].diagonal() += e.cols[i];
    }
    hess.setZero();
    for (Eigen::Index i = 0; i < free; ++i) {
      grad.segment(i * m, m) = w * (e.cols[n - 1] - e.cols[static_cast<std::size_t>(i)]);
      for (Eigen::Index k = 0; k < free; ++k) hess.block(i * m, k * m, m, m) = w * curv[n - 1];
      hess.block(i * m, i * m, m, m) += w * curv[static_cast<std::size_t>(i)];
    }
    // Constant shifts of any g_i leave the objective unchanged.
    hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
    const Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;

    const double slope = grad.dot(step);
    double t = 1.0;
    std::vector<Vector> trial(n);
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      Vector last = Vector::Zero(m);
      for (Eigen::Index i = 0; i < free; ++i) {
        trial[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] + t * step.segment(i * m, m);
        last -= trial[static_cast<std::size_t>(i)];
      }
      trial[n - 1] = last;
      accepted = evaluate(trial, false).value >= e.value + 1e-4 * t * slope;
      if (accepted) break;
    }
    // Past the objective's rounding floor the line search only finds
    // negligible steps; IBP takes it from here.
    if (!accepted || t < 1e-4) break;
    g = trial;
  }
  for (std::size_t i = 0; i < n; ++i) log_v[i] = log_eta + g[i];
  return steps;
}

}  // namespace

Matrix pooled_support(std::span<const DiscreteMeasure> measures, double merge_distance) {
  if (measures.empty()) throw std::invalid_argument("pooled_support: no measures");
  const auto d = measures.front().dim();
  std::vector<Vector> rows;
  const double r2 = merge_distance * merge_distance;
  for (const auto& mu : measures) {
    if (mu.dim() != d) throw std::invalid_argument("pooled_support: dimension mismatch");
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const Vector x = mu.support().row(i).transpose();
      const bool dup = std::any_of(rows.begin(), rows.end(),
                                   [&](const Vector& y) { return (x - y).squaredNorm() <= r2; });
      if (!dup) rows.push_back(x);
    }
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  return out;
}

BarycenterResult sinkhorn_barycenter(std::span<const DiscreteMeasure> measures, const Matrix& support,
                                     const SinkhornConfig& cfg, double beta,
                                     const Vector& reference_weights,
                                     const BarycenterObserver& observer) {
  cfg.validate();
  if (measures.empty()) throw std::invalid_argument("sinkhorn_barycenter: empty measure list");
  const Eigen::Index m = support.rows();
  if (m == 0) throw std::invalid_argument("sinkhorn_barycenter: empty support");
  if (reference_weights.size() != m) {
    throw std::invalid_argument("sinkhorn_barycenter: reference weights do not match support");
  }
  if ((reference_weights.array() <= 0.0).any() || std::abs(reference_weights.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "sinkhorn_barycenter: reference weights must be strictly positive and sum to 1");
  }
  for (const auto& mu : measures) {
    if (mu.dim() != support.cols()) {
      throw std::invalid_argument(fmt::format(
          "sinkhorn_barycenter: measure dimension {} does not match support dimension {}", mu.dim(),
          support.cols()));
    }
  }

  // Canonical support order makes the result independent of atom order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    for (Eigen::Index c = 0; c < support.cols(); ++c) {
      if (support(x, c) != support(y, c)) return support(x, c) < support(y, c);
    }
    return reference_weights[x] < reference_weights[y];
  });
  Matrix sorted_support(m, support.cols());
  Vector log_eta(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    sorted_support.row(k) = support.row(order[static_cast<std::size_t>(k)]);
    log_eta[k] = std::log(reference_weights[order[static_cast<std::size_t>(k)]]);
  }

  std::vector<Problem> probs(measures.size());
  double max_cost = 0.0;
  std::vector<Matrix> costs(measures.size());
  for (std::size_t i = 0; i < measures.size(); ++i) {
    const auto mu = measures[i].pruned().canonical();
    costs[i] = cost_matrix(mu.support(), sorted_support, beta, cfg.p, cfg.exec).entries;
    max_cost = std::max(max_cost, costs[i].maxCoeff());
    probs[i].a = mu.weights();
  }
  const bool log_mode = uses_log_domain(cfg, max_cost);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    auto& pb = probs[i];
    pb.log_a = pb.a.array().log();
    pb.fwd = log_mode ? Matrix(-costs[i] / cfg.epsilon)
                      : Matrix((-costs[i] / cfg.epsilon).unaryExpr([](double x) { return std::exp(x); }));
    pb.bwd = pb.fwd.transpose();
    pb.v = log_mode ? Vector::Zero(m) : Vector::Ones(m);
    pb.q.resize(m);
    pb.scratch.resize(pb.a.size());
    pb.u.resize(pb.a.size());
  }
  const double weight = 1.0 / static_cast<double>(probs.size());

  Vector log_b(m);
  auto emit = [&](int it) {
    if (!observer) return;
    observer(it, unsorted_weights(log_b, order));
  };

  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= cfg.max_iters; ++it) {
    residual = 0.0;
    for (auto& pb : probs) {
      // u <- a / (K v); the ratio to the previous u is the row-marginal error of
      // the plan whose column marginal is the current barycenter.
      if (log_mode) {
        kernels::row_logsumexp(pb.fwd, cspan(pb.v), mspan(pb.scratch), cfg.exec);
        Vector next = pb.log_a - pb.scratch;
        if (it > 0) residual = std::max(residual, (pb.a.array() * ((pb.u - next).array().exp() - 1.0).abs()).sum());
        pb.u = std::move(next);
        kernels::row_logsumexp(pb.bwd, cspan(pb.u), mspan(pb.q), cfg.exec);
      } else {
        kernels::matvec(pb.fwd, cspan(pb.v), mspan(pb.scratch), cfg.exec);
        check_positive(pb.scratch, "row");
        Vector next = pb.a.cwiseQuotient(pb.scratch);
        if (it > 0) residual = std::max(residual, (pb.a.array() * (pb.u.array() / next.array() - 1.0).abs()).sum());
        pb.u = std::move(next);
        kernels::matvec(pb.bwd, cspan(pb.u), mspan(pb.q), cfg.exec);
        check_positive(pb.q, "column");
      }
    }
    if (!std::isfinite(residual)) {
      throw ConvergenceError("sinkhorn_barycenter: non-finite scalings", residual, it);
    }
    if (it > 0 && residual <= cfg.tol) {
      BarycenterResult out;
      out.measure = DiscreteMeasure(support, unsorted_weights(log_b, order));
      out.iterations_used = it;
      out.marginal_residual = residual;
      out.log_domain = log_mode;
      return out;
    }
    if (it == cfg.max_iters) break;

    // b <- eta * geometric mean of K^T u_i, then v_i <- b / K^T u_i.
    log_b = log_eta;
    for (const auto& pb : probs) log_b += weight * (log_mode ? pb.q : Vector(pb.q.array().log()));
    log_b.array() -= log_sum_exp(log_b);
    for (auto& pb : probs) {
      pb.v = log_mode ? Vector(log_b - pb.q) : Vector(log_b.array().exp() / pb.q.array());
    }
    if (probs.size() > 1 && it + 1 == cfg.newton_after) {
      std::vector<Matrix> log_kernels;
      std::vector<Vector> weights, log_v;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        log_kernels.push_back(-costs[i] / cfg.epsilon);
        weights.push_back(probs[i].a);
        log_v.push_back(log_mode ? probs[i].v : Vector(probs[i].v.array().log()));
      }
      it += newton_refine(log_kernels, weights, log_eta, log_v, 0.1 * cfg.tol,
                          std::clamp(cfg.max_iters - it - 1, 0, 50), cfg.exec);
      for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i].v = log_mode ? log_v[i] : Vector(log_v[i].array().exp());
      }
    }
    emit(it + 1);
  }
  throw ConvergenceError(fmt::format("sinkhorn_barycenter: no convergence in {} iterations "
                                     "(residual {:.3e})",
                                     cfg.max_iters, residual),
                         residual, cfg.max_iters);
}

BarycenterResult sinkhorn_barycenter(std::span<const DiscreteMeasure> measures, const Matrix& support,
                                     const SinkhornConfig& cfg, double beta) {
  const Vector eta = Vector::Constant(support.rows(), 1.0 / static_cast<double>(support.rows()));
  return sinkhorn_barycenter(measures, support, cfg, beta, eta);
}

BarycenterResult sinkhorn_barycenter(std::span<const DiscreteMeasure> measures,
                                     std::span<const EmbeddedPoint> support, const SinkhornConfig& cfg,
                                     double beta, const Vector& reference_weights) {
  if (support.empty()) throw std::invalid_argument("sinkhorn_barycenter: empty support");
  Matrix s(static_cast<Eigen::Index>(support.size()), support.front().dim());
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k].dim() != s.cols()) throw std::invalid_argument("sinkhorn_barycenter: mixed support dimensions");
    s.row(static_cast<Eigen::Index>(k)) = support[k].coords.transpose();
  }
  return sinkhorn_barycenter(measures, s, cfg, beta, reference_weights);
}

}  // namespace wbc::ot
