#pragma once

#include "wbc/common.hpp"
#include "wbc/ot/measure.hpp"

#include <iosfwd>
#include <random>
#include <vector>

namespace wbc::exp {

/// Sample-complexity sweep for barycenters of 1D densities on [0, 1].
struct SweepSpec {
  std::vector<int> m_values{50, 100, 200, 400, 800};
  int n_measures = 3;
  int replicates = 10;
  int p = 2;
  int lattice_points = 64;
  /// Reference barycenters use ref_factor * max(m) samples per measure.
  int ref_factor = 20;
  Seed seed = 0;
  double tol = 1e-9;

  void validate() const;
};

/// Mixture of two Gaussians truncated to [0, 1]; measure i shifts the modes so
/// the inputs differ but all densities stay bounded away from 0 and infinity.
struct TruncatedMixture {
  double mean_a, sd_a, mean_b, sd_b, weight_a;

  static TruncatedMixture family_member(int index, int count);
  double sample(std::mt19937_64& rng) const;
};

struct SweepPoint {
  int m = 0;
  double epsilon = 0.0;
  double mean_error = 0.0;
  double stderr_ = 0.0;
  int replicates = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  /// Least-squares slope of log(mean_error) against log(m).
  double slope = 0.0;
};

/// Empirical measure of m draws, uniform weights, one coordinate.
ot::DiscreteMeasure sample_measure(const TruncatedMixture& density, int m, std::mt19937_64& rng);

/// For each m: draw m samples per density, set eps_m = diam^p / m, solve the
/// barycenter on the lattice, and score it by the debiased divergence at eps_m
/// against the barycenter of ref_factor * max(m) samples (same eps_m). The
/// lattice spans [0, 1], so diam = 1.
SweepResult run_fast_rate_sweep(const SweepSpec& spec);

double loglog_slope(const std::vector<SweepPoint>& points);

void write_fastrate_csv(std::ostream& os, const SweepResult& result);

}  // namespace wbc::exp
