#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "esag/distribution.hpp"
#include "esag/linalg.hpp"
#include "esag/rng.hpp"

namespace esag {

/// Affine map x -> (x - min) / range + 1 per covariate, retained so that
/// prediction inputs go through the same transformation as training data.
struct StandardizationRecord {
  std::vector<double> min;
  std::vector<double> range;

  int size() const { return static_cast<int>(min.size()); }
  Vector apply(const Vector& raw) const;
  /// True when every entry of `raw` lies inside the training range.
  bool covers(const Vector& raw) const;
};

/// Column k -> (x - min_k) / range_k + 1. Throws ZeroRange naming the column.
std::pair<RowMatrix, StandardizationRecord> standardize_covariates(
    const RowMatrix& raw, const std::vector<std::string>& names = {});

/// Responses (n x d, one unit vector per row) with covariates (n x q).
struct Dataset {
  RowMatrix responses;
  RowMatrix covariates;
  std::optional<StandardizationRecord> record;

  int n() const { return static_cast<int>(responses.rows()); }
  int d() const { return static_cast<int>(responses.cols()); }
  int q() const { return static_cast<int>(covariates.cols()); }

  /// Validates shapes and unit norms; throws on violation.
  void validate(double unit_tol = 1e-10) const;
};

struct RegressionCoefficients {
  Vector alpha0;  // d
  Matrix A1;      // d x q
  Vector beta0;   // p
  Matrix B1;      // p x q

  static RegressionCoefficients zeros(int d, int q);

  int d() const { return static_cast<int>(alpha0.size()); }
  int q() const { return static_cast<int>(A1.cols()); }
  int p() const { return static_cast<int>(beta0.size()); }

  Vector mu_at(const Vector& x) const { return alpha0 + A1 * x; }
  Vector gamma_at(const Vector& x) const { return beta0 + B1 * x; }
};

/// Which coefficient blocks are frozen at zero.
struct NullSpec {
  bool freeze_A1 = false;
  bool freeze_B1 = false;
  bool freeze_beta0 = false;
  std::set<int> frozen_alpha_columns;  // alpha_k = 0, k in 1..q
  std::set<int> frozen_beta_columns;   // beta_k = 0, k in 1..q

  static NullSpec unrestricted() { return {}; }
  /// gamma == 0 (isotropy).
  static NullSpec isotropic() { return {false, true, true, {}, {}}; }
  /// mu intercept-only.
  static NullSpec mean_intercept_only() { return {true, false, false, {}, {}}; }
  /// gamma intercept-only.
  static NullSpec shape_intercept_only() { return {false, true, false, {}, {}}; }

  bool alpha_column_free(int k) const;  // k in 1..q
  bool beta_column_free(int k) const;
  bool beta0_free() const { return !freeze_beta0; }

  int free_parameter_count(int d, int q) const;
  /// True when every block free here is also free in `other` and at least
  /// one block free in `other` is frozen here.
  bool strictly_nested_in(const NullSpec& other, int q) const;
  bool nested_in(const NullSpec& other, int q) const;

  /// Zeroes every frozen block.
  void apply(RegressionCoefficients& c) const;
  std::string describe() const;
};

/// Parses "isotropic" / "V", "mean" / "mu", "shape" / "gamma", "full", plus
/// optional ",alpha:k" / ",beta:k" column restrictions.
NullSpec parse_null_spec(const std::string& text);

/// Free coefficients in the order alpha0, A1 (column-major), beta0, B1.
Vector pack_free(const RegressionCoefficients& c, const NullSpec& spec);
RegressionCoefficients unpack_free(const Vector& theta, const NullSpec& spec,
                                   int d, int q);

/// Log-likelihood sentinel returned when some |mu_i| falls below the floor.
inline constexpr double kMuFloor = 1e-8;

/// Sum of log densities. OpenMP over observations; per-observation terms
/// are summed in index order so the value does not depend on thread count.
double loglik(const RegressionCoefficients& coeffs, const Dataset& data);

/// Single-threaded reference for loglik.
double loglik_serial(const RegressionCoefficients& coeffs, const Dataset& data);

/// Log-likelihood and its gradient with respect to the free coefficients.
double loglik_grad(const RegressionCoefficients& coeffs, const Dataset& data,
                   const NullSpec& spec, Vector& grad);

/// Single-threaded reference for loglik_grad.
double loglik_grad_serial(const RegressionCoefficients& coeffs, const Dataset& data,
                          const NullSpec& spec, Vector& grad);

/// Moment-based starting point. Throws DegenerateData if all responses coincide.
RegressionCoefficients init_coefficients(const Dataset& data, const NullSpec& spec);

enum class OptimizerMethod { Bfgs, NelderMead };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::Bfgs;
  int restarts = 5;
  double perturbation = 0.25;
  double rel_tol = 1e-8;
  /// Iteration budget is this times the number of free parameters.
  int max_iter_per_param = 5000;
  double grad_tol = 1e-7;
  /// When false and warm starts are supplied, only the warm starts are used.
  bool use_init = true;
};

struct FitResult {
  RegressionCoefficients coefficients;
  NullSpec spec;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  bool underdetermined = false;  // n below the free-parameter count
  RowMatrix mu_hat;     // n x d, mu_i = alpha0 + A1 x_i
  RowMatrix gamma_hat;  // n x p

  EsagParams observation_params(int i) const;
};

/// Maximum likelihood over the free blocks of `spec`. Starts from
/// init_coefficients plus any `warm_starts`, then `restarts` perturbed
/// restarts from the incumbent; returns the best.
FitResult fit(const Dataset& data, const NullSpec& spec, const OptimizerConfig& config,
              RandomStream& rng,
              std::span<const RegressionCoefficients> warm_starts = {});

/// Evaluates the per-observation parameters of `coeffs` on `data`.
FitResult make_fit_result(const RegressionCoefficients& coeffs, const NullSpec& spec,
                          const Dataset& data);

struct Prediction {
  EsagParams params;
  bool extrapolated = false;
};

/// EsagParams at raw covariates x, standardized through `record` first.
Prediction predict_params(const RegressionCoefficients& coeffs, const Vector& x,
                          const std::optional<StandardizationRecord>& record);

}  // namespace esag
