#include "esag/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>

#include "esag/error.hpp"

namespace esag {

NullSpec null_spec_for(NullFamily family) {
  switch (family) {
    case NullFamily::Isotropy: return NullSpec::isotropic();
    case NullFamily::MeanCovariate: return NullSpec::mean_intercept_only();
    case NullFamily::ShapeCovariate: return NullSpec::shape_intercept_only();
  }
  return NullSpec::unrestricted();
}

std::vector<Statistic> statistics_for(NullFamily family) {
  if (family == NullFamily::Isotropy) return {Statistic::RoC, Statistic::M, Statistic::LR};
  return {Statistic::RoC, Statistic::D, Statistic::M, Statistic::LR};
}

namespace catalog {
Vector alpha0() { return (Vector(4) << 2, -5, 3, 5).finished(); }
Vector alpha1() { return (Vector(4) << 2, 1, 2, 1).finished(); }
Vector alpha1r(double r) { return Vector::Constant(4, r / 2.0); }
Vector beta0() { return (Vector(5) << 3, 5, -3, -4, 2).finished(); }
Vector beta0r(double r) { return Vector::Constant(5, r / std::sqrt(5.0)); }
Vector beta1() { return (Vector(5) << 4, 2, 5, -2, 3).finished(); }
Vector beta1r(double r) { return Vector::Constant(5, r / std::sqrt(5.0)); }
}  // namespace catalog

std::vector<std::string> dgm_names() {
  return {"V0", "V1", "V2", "mu0", "mu1", "mu2", "mu3", "gamma0", "gamma1", "gamma2"};
}

DgmSpec make_dgm(const std::string& name, double r) {
  using namespace catalog;
  DgmSpec s;
  s.name = name;
  s.r = r;
  RegressionCoefficients& c = s.coefficients;
  c = RegressionCoefficients::zeros(4, 1);
  c.alpha0 = alpha0();
  if (name == "V0" || name == "V1" || name == "V2") {
    s.family = NullFamily::Isotropy;
    c.A1.col(0) = alpha1();
    if (name != "V0") c.beta0 = beta0r(r);
    if (name == "V2") c.B1.col(0) = beta1r(r);
    s.null_true = name == "V0";
  } else if (name == "mu0" || name == "mu1" || name == "mu2" || name == "mu3") {
    s.family = NullFamily::MeanCovariate;
    if (name != "mu0") c.A1.col(0) = alpha1r(r);
    if (name == "mu2" || name == "mu3") c.beta0 = beta0();
    if (name == "mu3") c.B1.col(0) = beta1();
    s.null_true = name == "mu0";
  } else if (name == "gamma0" || name == "gamma1" || name == "gamma2") {
    s.family = NullFamily::ShapeCovariate;
    c.A1.col(0) = alpha1();
    if (name == "gamma1") c.B1.col(0) = beta1r(r);
    if (name == "gamma2") {
      c.beta0 = beta0();
      c.B1.col(0) = beta1r(r);
    }
    s.null_true = name == "gamma0";
  } else {
    throw Error(ErrorKind::Misuse, "unknown data-generating mechanism '" + name + "'");
  }
  return s;
}

RowMatrix draw_regression(const RegressionCoefficients& coeffs, const RowMatrix& covariates,
                          RandomStream& rng) {
  const Eigen::Index n = covariates.rows();
  RowMatrix y(n, coeffs.d());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = covariates.row(i).transpose();
    y.row(i) = sample_one(EsagParams(coeffs.mu_at(x), coeffs.gamma_at(x)), rng).transpose();
  }
  return y;
}

Dataset generate_dgm(const DgmSpec& spec, int n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::Contract, "n must be at least 2");
  RandomStream xrng = derive_stream(seed, {0, kTagCovariates});
  RowMatrix raw(n, 1);
  for (int i = 0; i < n; ++i) raw(i, 0) = xrng.normal();
  Dataset data;
  auto [standardized, record] = standardize_covariates(raw);
  data.covariates = std::move(standardized);
  data.record = std::move(record);
  RandomStream yrng = derive_stream(seed, {0, kTagData});
  data.responses = draw_regression(spec.coefficients, data.covariates, yrng);
  return data;
}

namespace {

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t k, std::uint64_t tag) {
  return derive_stream(seed, {k, tag}).engine()();
}

bool unreliable(const TestReport& r) {
  return std::any_of(r.warnings.begin(), r.warnings.end(), [](const std::string& w) {
    return w.rfind("unreliable", 0) == 0;
  });
}

}  // namespace

RejectionDetail run_rejection_study_detail(const NullSpec& null_spec,
                                           std::span<const Statistic> statistics,
                                           const DgmSpec& dgm, const StudyConfig& config) {
  if (config.reps < 1) throw Error(ErrorKind::Contract, "reps must be at least 1");
  if (statistics.empty()) throw Error(ErrorKind::Misuse, "no statistic requested");
  const int k_stats = static_cast<int>(statistics.size());
  std::vector<std::vector<double>> pvals(config.reps, std::vector<double>(k_stats, 1.0));
  std::vector<std::vector<char>> flagged(config.reps, std::vector<char>(k_stats, 0));
  std::vector<std::string> failures(config.reps);
  const int workers = std::max(1, config.workers);

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (int k = 1; k <= config.reps; ++k) {
    try {
      const std::uint64_t uk = static_cast<std::uint64_t>(k);
      const Dataset data = generate_dgm(dgm, config.n, child_seed(config.seed, uk, kTagData));
      BootstrapConfig bc;
      bc.B = config.B;
      bc.seed = child_seed(config.seed, uk, kTagNullFit);
      bc.mc_size = config.mc_size;
      bc.workers = 1;
      bc.optimizer = config.optimizer;
      bc.replicate_restarts = config.replicate_restarts;
      const auto reports =
          bootstrap_test(data, null_spec, NullSpec::unrestricted(), statistics, bc);
      for (int s = 0; s < k_stats; ++s) {
        pvals[k - 1][s] = reports[s].p_value;
        flagged[k - 1][s] = unreliable(reports[s]) ? 1 : 0;
      }
    } catch (const std::exception& e) {
      failures[k - 1] = e.what();
    }
  }
  for (int k = 0; k < config.reps; ++k)
    if (!failures[k].empty())
      throw Error(ErrorKind::DegenerateFit,
                  "study replicate " + std::to_string(k + 1) + " failed: " + failures[k]);

  RejectionDetail out;
  out.p_values = pvals;
  for (int s = 0; s < k_stats; ++s) {
    int flagged_count = 0;
    for (int k = 0; k < config.reps; ++k) flagged_count += flagged[k][s];
    for (double level : config.levels) {
      int rejections = 0;
      for (int k = 0; k < config.reps; ++k)
        if (pvals[k][s] < level) ++rejections;
      RejectionCell cell;
      cell.dgm = dgm.name;
      cell.r = dgm.r;
      cell.n = config.n;
      cell.statistic = statistic_name(statistics[s]);
      cell.level = level;
      cell.rate = static_cast<double>(rejections) / config.reps;
      cell.se = std::sqrt(cell.rate * (1.0 - cell.rate) / config.reps);
      cell.reps = config.reps;
      cell.B = config.B;
      cell.seed = config.seed;
      cell.unreliable_reps = flagged_count;
      out.cells.push_back(cell);
    }
  }
  return out;
}

std::vector<RejectionCell> run_rejection_study(const NullSpec& null_spec,
                                               std::span<const Statistic> statistics,
                                               const DgmSpec& dgm, const StudyConfig& config) {
  return run_rejection_study_detail(null_spec, statistics, dgm, config).cells;
}

std::vector<CoverageCell> run_coverage_study(const EsagParams& truth,
                                             const CoverageConfig& config) {
  if (config.reps < 1) throw Error(ErrorKind::Contract, "reps must be at least 1");
  const int n_levels = static_cast<int>(config.levels.size());
  std::vector<std::vector<double>> cov(config.reps, std::vector<double>(n_levels, 0.0));
  std::vector<std::string> failures(config.reps);
  const int workers = std::max(1, config.workers);

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (int k = 1; k <= config.reps; ++k) {
    try {
      const std::uint64_t uk = static_cast<std::uint64_t>(k);
      RandomStream rng = derive_stream(config.seed, {uk, kTagData});
      Dataset data;
      data.responses = sample(truth, config.n, rng);
      data.covariates.resize(config.n, 0);
      RegionConfig rc;
      rc.m = config.m;
      rc.B = config.B;
      rc.seed = child_seed(config.seed, uk, kTagPredict);
      rc.workers = 1;
      rc.optimizer = config.optimizer;
      const auto regions = prediction_regions(data, Vector(0), config.levels, rc);
      for (int l = 0; l < n_levels; ++l) cov[k - 1][l] = coverage(regions[l], data.responses);
    } catch (const std::exception& e) {
      failures[k - 1] = e.what();
    }
  }
  for (int k = 0; k < config.reps; ++k)
    if (!failures[k].empty())
      throw Error(ErrorKind::DegenerateFit,
                  "coverage replicate " + std::to_string(k + 1) + " failed: " + failures[k]);

  std::vector<CoverageCell> cells;
  for (int l = 0; l < n_levels; ++l) {
    double sum = 0.0;
    for (int k = 0; k < config.reps; ++k) sum += cov[k][l];
    const double mean = sum / config.reps;
    double ss = 0.0;
    for (int k = 0; k < config.reps; ++k) ss += (cov[k][l] - mean) * (cov[k][l] - mean);
    CoverageCell c;
    c.n = config.n;
    c.level = config.levels[l];
    c.mean = mean;
    c.sd = config.reps > 1 ? std::sqrt(ss / (config.reps - 1)) : 0.0;
    c.se = c.sd / std::sqrt(static_cast<double>(config.reps));
    c.reps = config.reps;
    c.m = config.m;
    c.B = config.B;
    c.seed = config.seed;
    cells.push_back(c);
  }
  return cells;
}

ProfileResult concentration_profile(const RowMatrix& sample, const Vector& mu_star,
                                    const Matrix& rotation, std::span<const double> c_grid,
                                    double c_a) {
  const int d = static_cast<int>(sample.cols());
  if (sample.rows() == 0) throw Error(ErrorKind::Contract, "empty sample");
  if (c_grid.empty()) throw Error(ErrorKind::Contract, "empty grid");
  for (std::size_t k = 0; k < c_grid.size(); ++k) {
    if (!(c_grid[k] > 0.0)) throw Error(ErrorKind::Contract, "grid values must be positive");
    if (k > 0 && !(c_grid[k] > c_grid[k - 1]))
      throw Error(ErrorKind::Contract, "grid must be strictly increasing");
  }
  const Vector dir = rotation * mu_star.normalized();
  const Vector zero = Vector::Zero(gamma_dim(d));
  DensityKernel kernel(d);
  ProfileResult out;
  out.c_grid.assign(c_grid.begin(), c_grid.end());
  out.c_a = c_a;
  std::size_t best = 0;
  for (std::size_t k = 0; k < c_grid.size(); ++k) {
    const Vector mu = c_grid[k] * dir;
    kernel.set({mu.data(), std::size_t(d)}, {zero.data(), std::size_t(zero.size())});
    double sum = 0.0;
    for (Eigen::Index i = 0; i < sample.rows(); ++i)
      sum += kernel.log_density({sample.row(i).data(), std::size_t(d)});
    out.loglik.push_back(sum / static_cast<double>(sample.rows()));
    if (out.loglik[k] > out.loglik[best]) best = k;
  }
  out.c_star = c_grid[best];
  out.roc_star = c_a / out.c_star;
  return out;
}

Matrix plane_rotation(int d, int i, int j, double angle) {
  Matrix r = Matrix::Identity(d, d);
  r(i, i) = std::cos(angle);
  r(j, j) = std::cos(angle);
  r(i, j) = -std::sin(angle);
  r(j, i) = std::sin(angle);
  return r;
}

void write_rejection_csv(std::ostream& os, std::span<const RejectionCell> cells) {
  const auto old = os.precision(10);
  os << "dgm,r,n,statistic,level,rate,se,reps,B,seed\n";
  for (const auto& c : cells)
    os << c.dgm << ',' << c.r << ',' << c.n << ',' << c.statistic << ',' << c.level << ','
       << c.rate << ',' << c.se << ',' << c.reps << ',' << c.B << ',' << c.seed << '\n';
  os.precision(old);
}

void write_coverage_csv(std::ostream& os, std::span<const CoverageCell> cells) {
  const auto old = os.precision(10);
  os << "n,level,mean,sd,se,reps,m,B,seed\n";
  for (const auto& c : cells)
    os << c.n << ',' << c.level << ',' << c.mean << ',' << c.sd << ',' << c.se << ','
       << c.reps << ',' << c.m << ',' << c.B << ',' << c.seed << '\n';
  os.precision(old);
}

}  // namespace esag
