#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esag/regression.hpp"

namespace esag {

enum class QuantileRule {
  OrderStatistic,  // k-th order statistic, k = ceil(level * N)
  Interpolated,    // linear interpolation between order statistics
};

struct RegionConfig {
  int m = 2000;
  int B = 0;
  std::uint64_t seed = 0;
  int workers = 1;
  QuantileRule rule = QuantileRule::OrderStatistic;
  OptimizerConfig optimizer;
  /// Restarts for the refits on resampled data, which are warm-started
  /// from the observed-data fit.
  int replicate_restarts = 0;
};

/// {y : (y - center)' Vinv (y - center) <= threshold}.
struct PredictionRegion {
  Vector center;
  Matrix Vinv;
  double threshold = 0.0;
  double level = 0.0;  // nominal coverage 1 - a
  int m = 0;
  int B = 0;
  int replicates_used = 0;
  std::uint64_t seed = 0;
  bool extrapolated = false;
  std::vector<std::string> warnings;
};

/// Quadratic form (y - c)' Vinv (y - c).
double region_form(const Vector& center, const Matrix& vinv, const Vector& y);

/// Quantile of an ascending sample at probability `level`.
double sample_quantile(std::span<const double> sorted, double level, QuantileRule rule);

/// Regions at several levels sharing one pooled sample of quadratic forms.
/// Fits the unrestricted regression, evaluates (mu, V) at the raw
/// covariates x0, draws m forms, then for each of B pairs-bootstrap
/// replicates refits and draws m more forms against the replicate's own
/// center and V. Levels are nominal coverages in (0, 1).
std::vector<PredictionRegion> prediction_regions(const Dataset& data, const Vector& x0,
                                                 std::span<const double> levels,
                                                 const RegionConfig& config);

PredictionRegion prediction_region(const Dataset& data, const Vector& x0, double level,
                                   const RegionConfig& config);

/// Known-parameter regions: no fitting, m draws from `params`.
std::vector<PredictionRegion> known_parameter_regions(const EsagParams& params,
                                                      std::span<const double> levels, int m,
                                                      std::uint64_t seed,
                                                      QuantileRule rule = QuantileRule::OrderStatistic);

bool contains(const PredictionRegion& region, const Vector& y);

/// Fraction of rows of `sample` inside the region.
double coverage(const PredictionRegion& region, const RowMatrix& sample);

/// 2 * sum of squared eigenvalues of G, the variance of Z'GZ for standard
/// normal Z. Requires |det G - 1| <= 1e-8.
double quadform_variance(const Matrix& G);

}  // namespace esag
