#pragma once

#include "wbc/ot/cost.hpp"

#include <span>
#include <vector>

namespace wbc::ot {

enum class SinkhornDomain {
  automatic,  ///< log domain when epsilon < kLogDomainRatio * max(D)
  kernel,
  log,
};

inline constexpr double kLogDomainRatio = 0.05;

struct SinkhornConfig {
  double epsilon = 0.1;
  int max_iters = 2000;
  /// L1 violation of the row marginal at which iterations stop.
  double tol = 1e-6;
  int p = 2;
  /// Divergence diagnostics subtract the self-transport terms when set.
  bool debias = true;
  /// Scaling iterations before switching to Newton steps on the dual, which
  /// share the fixed point but converge quadratically. Both count towards
  /// max_iters. A negative value disables the switch.
  int newton_after = 100;
  SinkhornDomain domain = SinkhornDomain::automatic;
  kernels::Exec exec = kernels::Exec::parallel;

  void validate() const;
};

/// True when the configured domain (or the automatic rule) selects log space.
bool uses_log_domain(const SinkhornConfig& cfg, double max_cost);

struct CouplingPlan {
  Matrix gamma;
  Vector source_marginal;
  Vector target_marginal;

  /// max of the L1 row and column marginal violations
  double marginal_residual() const;
};

struct SinkhornResult {
  /// <gamma, D>: transport cost of the entropic plan, entropy excluded.
  double cost = 0.0;
  /// <gamma, D> + eps KL(gamma | a (x) b); the quantity the divergence debiases.
  double entropic_objective = 0.0;
  CouplingPlan plan;
  int iterations = 0;
  double residual = 0.0;
  bool log_domain = false;
};

/// Entropic OT between weight vectors a, b under a precomputed cost. Zero
/// weights must already be pruned. Throws ConvergenceError when max_iters is
/// exhausted and KernelUnderflowError when the kernel path loses a row/column.
SinkhornResult sinkhorn_scaling(const Vector& a, const Vector& b, const Matrix& cost,
                                const SinkhornConfig& cfg);

/// Entropic OT between measures. Atoms are canonicalized before solving, so
/// results do not depend on atom order; the plan is reported in the callers'
/// atom order (zero-weight atoms get zero rows/columns).
SinkhornResult sinkhorn_ot(const DiscreteMeasure& src, const DiscreteMeasure& dst,
                           const SinkhornConfig& cfg, double beta);

/// Debiased divergence OT(a,b) - (OT(a,a) + OT(b,b)) / 2 on the entropic
/// objective. Exactly symmetric. Falls back to the raw objective when
/// cfg.debias is false.
double sinkhorn_divergence(const DiscreteMeasure& src, const DiscreteMeasure& dst,
                           const SinkhornConfig& cfg, double beta);

/// Entropic objective of transporting a measure onto itself.
double self_transport(const DiscreteMeasure& mu, const SinkhornConfig& cfg, double beta);

/// Symmetric matrix of sinkhorn_divergence over all pairs; the diagonal is
/// zero. Self-transport terms are computed once per measure and, when
/// requested, handed back through `self_terms`.
Matrix pairwise_divergence_matrix(std::span<const DiscreteMeasure> measures,
                                  const SinkhornConfig& cfg, double beta,
                                  std::vector<double>* self_terms = nullptr);

/// Largest off-diagonal entry of a pairwise divergence matrix.
double max_pairwise(const Matrix& divergences);

}  // namespace wbc::ot
