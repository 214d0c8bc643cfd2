#pragma once

#include "wbc/ot/measure.hpp"

#include <span>

namespace wbc::ot {

/// p-Wasserstein cost W_p^p between two weighted point sets on the line,
/// by monotone (quantile) matching.
double wasserstein_1d(std::span<const double> x, std::span<const double> wx, std::span<const double> y,
                      std::span<const double> wy, int p);

/// Mean over `n_projections` random unit directions of the 1D W_p^p between
/// the projected measures. Directions come from a Gaussian draw seeded with
/// `seed`. Uses plain Euclidean geometry on the embedding (no beta weighting).
double sliced_wasserstein(const DiscreteMeasure& src, const DiscreteMeasure& dst, int n_projections,
                          int p, Seed seed);

}  // namespace wbc::ot
