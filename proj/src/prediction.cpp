#include "esag/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "esag/error.hpp"

namespace esag {

double region_form(const Vector& center, const Matrix& vinv, const Vector& y) {
  const Vector r = y - center;
  return r.dot(vinv * r);
}

double sample_quantile(std::span<const double> sorted, double level, QuantileRule rule) {
  if (sorted.empty()) throw Error(ErrorKind::Contract, "empty sample");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::Contract, "level must be in (0, 1)");
  const double n = static_cast<double>(sorted.size());
  if (rule == QuantileRule::OrderStatistic) {
    // Guard against level * n landing a rounding error above an integer.
    const double k = std::ceil(level * n - 1e-9);
    const auto idx = static_cast<std::size_t>(std::clamp(k, 1.0, n)) - 1;
    return sorted[idx];
  }
  const double h = (n - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

void check_levels(std::span<const double> levels) {
  if (levels.empty()) throw Error(ErrorKind::Contract, "no levels requested");
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0)) throw Error(ErrorKind::Contract, "levels must lie in (0, 1)");
}

void append_forms(const EsagParams& params, int m, RandomStream& rng, std::vector<double>& out) {
  const Vector center = params.mean_direction();
  const Matrix& vinv = params.cov().Vinv;
  for (int j = 0; j < m; ++j) out.push_back(region_form(center, vinv, sample_one(params, rng)));
}

std::vector<PredictionRegion> make_regions(const EsagParams& params, std::vector<double>& pool,
                                           std::span<const double> levels, QuantileRule rule) {
  std::sort(pool.begin(), pool.end());
  std::vector<PredictionRegion> out;
  for (double level : levels) {
    PredictionRegion r;
    r.center = params.mean_direction();
    r.Vinv = params.cov().Vinv;
    r.level = level;
    r.threshold = sample_quantile(pool, level, rule);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<PredictionRegion> known_parameter_regions(const EsagParams& params,
                                                      std::span<const double> levels, int m,
                                                      std::uint64_t seed, QuantileRule rule) {
  check_levels(levels);
  if (m < 1) throw Error(ErrorKind::Contract, "m must be at least 1");
  RandomStream rng = derive_stream(seed, {0, kTagPredict});
  std::vector<double> pool;
  pool.reserve(m);
  append_forms(params, m, rng, pool);
  auto regions = make_regions(params, pool, levels, rule);
  for (auto& r : regions) {
    r.m = m;
    r.seed = seed;
  }
  return regions;
}

std::vector<PredictionRegion> prediction_regions(const Dataset& data, const Vector& x0,
                                                 std::span<const double> levels,
                                                 const RegionConfig& config) {
  check_levels(levels);
  data.validate();
  if (config.m < 1) throw Error(ErrorKind::Contract, "m must be at least 1");
  if (config.B < 0) throw Error(ErrorKind::Contract, "B must be nonnegative");
  const int n = data.n();
  const std::uint64_t seed = config.seed;
  const NullSpec full = NullSpec::unrestricted();

  RandomStream fit_rng = derive_stream(seed, {0, kTagNullFit});
  const FitResult fitted = fit(data, full, config.optimizer, fit_rng);
  const Prediction pred = predict_params(fitted.coefficients, x0, data.record);
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(config.m) * (config.B + 1));
  RandomStream draw_rng = derive_stream(seed, {0, kTagPredict});
  append_forms(pred.params, config.m, draw_rng, pool);

  OptimizerConfig rep_config = config.optimizer;
  rep_config.restarts = config.replicate_restarts;
  rep_config.use_init = false;
  std::vector<std::vector<double>> rep_forms(config.B);
  std::vector<char> rep_ok(config.B, 0);
  const int workers = std::max(1, config.workers);

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (int b = 1; b <= config.B; ++b) {
    try {
      const std::uint64_t ub = static_cast<std::uint64_t>(b);
      RandomStream resample_rng = derive_stream(seed, {ub, kTagResample});
      Dataset boot;
      boot.responses.resize(n, data.d());
      boot.covariates.resize(n, data.q());
      boot.record = data.record;
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(resample_rng.index(static_cast<std::size_t>(n)));
        boot.responses.row(i) = data.responses.row(k);
        boot.covariates.row(i) = data.covariates.row(k);
      }
      RandomStream rng = derive_stream(seed, {ub, kTagNullFit});
      std::vector<RegressionCoefficients> warm{fitted.coefficients};
      const FitResult f = fit(boot, full, rep_config, rng, warm);
      if (!f.converged) continue;
      const Prediction p = predict_params(f.coefficients, x0, data.record);
      RandomStream rep_draw = derive_stream(seed, {ub, kTagPredict});
      rep_forms[b - 1].reserve(config.m);
      append_forms(p.params, config.m, rep_draw, rep_forms[b - 1]);
      rep_ok[b - 1] = 1;
    } catch (const std::exception&) {
      rep_forms[b - 1].clear();
    }
  }

  int used = 0;
  for (int b = 0; b < config.B; ++b) {
    if (!rep_ok[b]) continue;
    ++used;
    pool.insert(pool.end(), rep_forms[b].begin(), rep_forms[b].end());
  }
  auto regions = make_regions(pred.params, pool, levels, config.rule);
  for (auto& r : regions) {
    r.m = config.m;
    r.B = config.B;
    r.replicates_used = used;
    r.seed = seed;
    r.extrapolated = pred.extrapolated;
    if (!fitted.converged) r.warnings.push_back("fit did not converge");
    if (used < config.B)
      r.warnings.push_back(std::to_string(config.B - used) +
                           " bootstrap refits dropped for non-convergence");
    if (pred.extrapolated) r.warnings.push_back("x0 lies outside the observed covariate range");
  }
  return regions;
}

PredictionRegion prediction_region(const Dataset& data, const Vector& x0, double level,
                                   const RegionConfig& config) {
  const double one[1] = {level};
  return prediction_regions(data, x0, one, config).front();
}

bool contains(const PredictionRegion& region, const Vector& y) {
  if (y.size() != region.center.size())
    throw Error(ErrorKind::Contract, "dimension mismatch");
  return region_form(region.center, region.Vinv, y) <= region.threshold;
}

double coverage(const PredictionRegion& region, const RowMatrix& sample) {
  if (sample.rows() == 0) throw Error(ErrorKind::Contract, "empty sample");
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < sample.rows(); ++i)
    if (contains(region, sample.row(i).transpose())) ++inside;
  return static_cast<double>(inside) / static_cast<double>(sample.rows());
}

double quadform_variance(const Matrix& G) {
  if (G.rows() != G.cols() || G.rows() == 0)
    throw Error(ErrorKind::Contract, "G must be square");
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, G.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::Contract, "G must be symmetric");
  const SymmetricEigen eig = jacobi_eigen(G);
  if (eig.values.minCoeff() <= 0.0) throw Error(ErrorKind::Contract, "G must be positive definite");
  const double det = eig.values.prod();
  if (std::abs(det - 1.0) > 1e-8) throw Error(ErrorKind::Contract, "det G must equal 1");
  return 2.0 * eig.values.squaredNorm();
}

}  // namespace esag
