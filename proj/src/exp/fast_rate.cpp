#include "wbc/exp/fast_rate.hpp"

#include "wbc/ot/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace wbc::exp {

void SweepSpec::validate() const {
  if (m_values.empty()) throw std::invalid_argument("sweep_m must list at least one sample size");
  for (int m : m_values) {
    if (m < 1) throw std::invalid_argument(fmt::format("sweep_m entries must be >= 1, got {}", m));
  }
  if (n_measures < 1) throw std::invalid_argument("sweep_measures must be >= 1");
  if (replicates < 1) throw std::invalid_argument("sweep_replicates must be >= 1");
  if (p < 1 || p > 2) throw std::invalid_argument("sweep_p must be 1 or 2");
  if (lattice_points < 2) throw std::invalid_argument("sweep_lattice must be >= 2");
  if (ref_factor < 1) throw std::invalid_argument("sweep_ref_factor must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("sweep_tol must be > 0");
}

TruncatedMixture TruncatedMixture::family_member(int index, int count) {
  const double shift = count > 1 ? static_cast<double>(index) / (count - 1) - 0.5 : 0.0;
  return {0.3 + 0.1 * shift, 0.1, 0.7 + 0.05 * shift, 0.15, 0.5 + 0.2 * shift};
}

double TruncatedMixture::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool first = coin(rng) < weight_a;
  std::normal_distribution<double> g(first ? mean_a : mean_b, first ? sd_a : sd_b);
  for (;;) {
    const double x = g(rng);
    if (x >= 0.0 && x <= 1.0) return x;
  }
}

ot::DiscreteMeasure sample_measure(const TruncatedMixture& density, int m, std::mt19937_64& rng) {
  Matrix support(m, 1);
  for (int k = 0; k < m; ++k) support(k, 0) = density.sample(rng);
  return ot::DiscreteMeasure::uniform(std::move(support));
}

namespace {

Matrix lattice(int points) {
  Matrix out(points, 1);
  for (int k = 0; k < points; ++k) out(k, 0) = static_cast<double>(k) / (points - 1);
  return out;
}

ot::DiscreteMeasure barycenter_of(const std::vector<TruncatedMixture>& family, int m, const Matrix& support,
                                  const ot::SinkhornConfig& cfg, std::mt19937_64& rng) {
  std::vector<ot::DiscreteMeasure> inputs;
  for (const auto& d : family) inputs.push_back(sample_measure(d, m, rng));
  return ot::sinkhorn_barycenter(inputs, support, cfg, 1.0).measure;
}

}  // namespace

double loglog_slope(const std::vector<SweepPoint>& points) {
  if (points.size() < 2) return 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(points.size());
  for (const auto& pt : points) {
    const double x = std::log(static_cast<double>(pt.m));
    const double y = std::log(pt.mean_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SweepResult run_fast_rate_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<TruncatedMixture> family;
  for (int i = 0; i < spec.n_measures; ++i) family.push_back(TruncatedMixture::family_member(i, spec.n_measures));
  const Matrix support = lattice(spec.lattice_points);
  const double diameter = 1.0;
  const int m_ref = spec.ref_factor * *std::max_element(spec.m_values.begin(), spec.m_values.end());

  SweepResult result;
  std::mt19937_64 ref_rng(spec.seed ^ 0x5851f42d4c957f2dULL);
  std::mt19937_64 rng(spec.seed);
  for (int m : spec.m_values) {
    ot::SinkhornConfig cfg;
    cfg.p = spec.p;
    cfg.epsilon = std::pow(diameter, spec.p) / m;
    cfg.tol = spec.tol;
    cfg.max_iters = 20000;
    cfg.newton_after = 20;

    const auto reference = barycenter_of(family, m_ref, support, cfg, ref_rng);
    std::vector<double> errors;
    for (int r = 0; r < spec.replicates; ++r) {
      const auto estimate = barycenter_of(family, m, support, cfg, rng);
      errors.push_back(std::max(0.0, ot::sinkhorn_divergence(estimate, reference, cfg, 1.0)));
    }
    SweepPoint pt;
    pt.m = m;
    pt.epsilon = cfg.epsilon;
    pt.replicates = spec.replicates;
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    pt.mean_error = mean;
    pt.stderr_ = errors.size() > 1 ? std::sqrt(var / static_cast<double>(errors.size() - 1) / errors.size()) : 0.0;
    result.points.push_back(pt);
  }
  result.slope = loglog_slope(result.points);
  return result;
}

void write_fastrate_csv(std::ostream& os, const SweepResult& result) {
  os << "m,epsilon_m,mean_error,stderr,replicates\n";
  for (const auto& pt : result.points) {
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", pt.m, pt.epsilon, pt.mean_error, pt.stderr_, pt.replicates);
  }
}

}  // namespace wbc::exp
