#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "esag/inference.hpp"
#include "esag/prediction.hpp"

namespace esag {

/// Null hypothesis families of the simulation design.
enum class NullFamily { Isotropy, MeanCovariate, ShapeCovariate };

NullSpec null_spec_for(NullFamily family);
/// Statistics studied for a family: RoC, M, LR for isotropy and RoC, D,
/// M, LR for the covariate-dependence nulls.
std::vector<Statistic> statistics_for(NullFamily family);

/// One data-generating mechanism with d = 4 and one covariate.
struct DgmSpec {
  std::string name;  // e.g. "V0", "mu1", "gamma2"
  NullFamily family = NullFamily::Isotropy;
  double r = 0.0;
  bool null_true = false;
  RegressionCoefficients coefficients;  // alpha0, A1 (4 x 1), beta0, B1 (5 x 1)
};

/// Catalog entries. Names: V0 V1 V2 mu0 mu1 mu2 mu3 gamma0 gamma1 gamma2.
DgmSpec make_dgm(const std::string& name, double r = 0.0);
std::vector<std::string> dgm_names();

namespace catalog {
Vector alpha0();        // (2, -5, 3, 5)
Vector alpha1();        // (2, 1, 2, 1)
Vector alpha1r(double r);  // (r / 2) 1_4
Vector beta0();         // (3, 5, -3, -4, 2)
Vector beta0r(double r);   // (r / sqrt 5) 1_5
Vector beta1();         // (4, 2, 5, -2, 3)
Vector beta1r(double r);   // (r / sqrt 5) 1_5
}  // namespace catalog

/// Covariates X'_i ~ N(0, 1) standardized to [1, 2]; responses from the
/// DGM's conditional ESAG.
Dataset generate_dgm(const DgmSpec& spec, int n, std::uint64_t seed);

/// Responses drawn from `coeffs` at the given (standardized) covariates.
RowMatrix draw_regression(const RegressionCoefficients& coeffs, const RowMatrix& covariates,
                          RandomStream& rng);

struct StudyConfig {
  int n = 200;
  int B = 300;
  int reps = 200;
  std::vector<double> levels{0.01, 0.05, 0.10};
  std::uint64_t seed = 0;
  int mc_size = 10000;
  /// Replicates run in parallel; bootstraps inside each run serially.
  int workers = 1;
  OptimizerConfig optimizer;
  int replicate_restarts = 0;
};

/// One row of a tidy rejection table.
struct RejectionCell {
  std::string dgm;
  double r = 0.0;
  int n = 0;
  std::string statistic;
  double level = 0.0;
  double rate = 0.0;
  double se = 0.0;
  int reps = 0;
  int B = 0;
  std::uint64_t seed = 0;
  int unreliable_reps = 0;  // replicates whose report carried a warning
};

/// Rejection rates (p < level) over `reps` simulated datasets; every
/// statistic shares the same datasets and fits.
std::vector<RejectionCell> run_rejection_study(const NullSpec& null_spec,
                                               std::span<const Statistic> statistics,
                                               const DgmSpec& dgm, const StudyConfig& config);

/// p-values per replicate (rows) and statistic (columns), for diagnostics.
struct RejectionDetail {
  std::vector<RejectionCell> cells;
  std::vector<std::vector<double>> p_values;
};
RejectionDetail run_rejection_study_detail(const NullSpec& null_spec,
                                           std::span<const Statistic> statistics,
                                           const DgmSpec& dgm, const StudyConfig& config);

struct CoverageConfig {
  int n = 200;
  int m = 2000;
  int B = 0;
  int reps = 2000;
  std::vector<double> levels{0.90, 0.95, 0.99};
  std::uint64_t seed = 0;
  int workers = 1;
  OptimizerConfig optimizer;
};

struct CoverageCell {
  int n = 0;
  double level = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // spread of per-replicate coverage
  double se = 0.0;  // sd / sqrt(reps)
  int reps = 0;
  int m = 0;
  int B = 0;
  std::uint64_t seed = 0;
};

/// Within-sample coverage of prediction regions built from intercept-only
/// samples of ESAG(truth).
std::vector<CoverageCell> run_coverage_study(const EsagParams& truth, const CoverageConfig& config);

struct ProfileResult {
  std::vector<double> c_grid;
  std::vector<double> loglik;  // mean log-likelihood per grid point
  double c_star = 0.0;
  double c_a = 0.0;
  double roc_star = 0.0;  // c_a / c_star
};

/// Mean isotropic-ESAG log-likelihood of `sample` with mean c R mu_star
/// over a sorted positive grid of c.
ProfileResult concentration_profile(const RowMatrix& sample, const Vector& mu_star,
                                    const Matrix& rotation, std::span<const double> c_grid,
                                    double c_a);

/// Rotation by `angle` radians in the plane of coordinates (i, j).
Matrix plane_rotation(int d, int i, int j, double angle);

/// Tidy CSV with header dgm,r,n,statistic,level,rate,se,reps,B,seed.
void write_rejection_csv(std::ostream& os, std::span<const RejectionCell> cells);
void write_coverage_csv(std::ostream& os, std::span<const CoverageCell> cells);

}  // namespace esag
