#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esag/regression.hpp"

namespace esag {

enum class Statistic { RoC, D, M, LR };

std::string statistic_name(Statistic s);
/// Accepts "roc", "d", "m", "lr" in any case.
Statistic parse_statistic(const std::string& text);

/// Mean ratio of alternative to null concentrations.
double roc_statistic(const FitResult& fit0, const FitResult& fitA);

/// Mean of (2 - cos_i) * ratio_i, where cos_i compares fitted mean directions.
double d_statistic(const FitResult& fit0, const FitResult& fitA);

/// Elementwise Monte Carlo mean of Y^2 under each observation's fitted
/// null distribution; n x d.
RowMatrix null_second_moments(const FitResult& fit0, int mc_size, RandomStream& rng);

/// Norm of the mean difference between observed Y_i^2 and `expected`.
double m_statistic(const Dataset& data, const RowMatrix& expected);

double m_statistic(const FitResult& fit0, const Dataset& data, int mc_size,
                   RandomStream& rng);

/// 2 (loglik_A - loglik_0), floored at zero. `deficit` receives the amount
/// floored away. Throws Misuse unless fit0.spec is nested in fitA.spec.
double lr_statistic(const FitResult& fit0, const FitResult& fitA,
                    double* deficit = nullptr);

struct FitSummary {
  std::string spec;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  int free_parameters = 0;
};

FitSummary summarize(const FitResult& fit, int d, int q);

struct BootstrapConfig {
  int B = 300;
  std::uint64_t seed = 0;
  int mc_size = 10000;
  int workers = 1;
  /// Use (s + 1) / (B + 1) instead of s / B.
  bool plus_one = false;
  OptimizerConfig optimizer;
  /// Perturbed restarts for the refits inside each replicate; refits are
  /// warm-started from the observed-data fits.
  int replicate_restarts = 0;
};

struct TestReport {
  std::string statistic_name;
  double observed_value = 0.0;
  std::vector<double> bootstrap_values;  // included replicates, in replicate order
  std::vector<int> excluded;             // replicate indices (1-based) dropped
  double p_value = 0.0;
  int B = 0;
  std::uint64_t seed = 0;
  int mc_size = 0;
  bool plus_one = false;
  FitSummary null_fit;
  FitSummary alt_fit;
  std::vector<std::string> warnings;
};

/// Exceedance count rule: #{b : t_b > observed} / B, or (s + 1) / (B + 1).
double bootstrap_p_value(double observed, std::span<const double> values, bool plus_one);

/// Parametric bootstrap under the null fit. Replicate b draws
/// Y_i ~ ESAG(mu0_i, gamma0_i) with X fixed, refits both specs and
/// recomputes every requested statistic. Each replicate owns substreams
/// derived from (seed, b), so the reports do not depend on `workers`, and
/// a statistic's report is the same whether requested alone or with others.
std::vector<TestReport> bootstrap_test(const Dataset& data, const NullSpec& null_spec,
                                       const NullSpec& alt_spec,
                                       std::span<const Statistic> statistics,
                                       const BootstrapConfig& config);

TestReport bootstrap_test(const Dataset& data, const NullSpec& null_spec,
                          const NullSpec& alt_spec, Statistic statistic,
                          const BootstrapConfig& config);

/// Residual statistic per observation:
/// T_i = (|mu_i|^2 + tr V_i) r_i' V_i^{-1} r_i with r_i = (I - c c') y_i.
Vector gof_T(const FitResult& fit, const Dataset& data);

/// Kolmogorov-Smirnov distance between the sample and chi^2 with `dof`.
double ks_distance_chisq(const Vector& values, int dof);

struct GofReport {
  Vector T;
  double mean_T = 0.0;
  double ks = 0.0;
  std::vector<double> bootstrap_values;
  std::vector<int> excluded;
  double p_value = 0.0;
  int B = 0;
  std::uint64_t seed = 0;
  FitSummary fit;
  std::vector<std::string> warnings;
};

/// Residual goodness-of-fit test: KS distance of {T_i} to chi^2_{d-1},
/// calibrated by a parametric bootstrap from the fitted model.
GofReport gof_test(const Dataset& data, const NullSpec& spec, const BootstrapConfig& config);

}  // namespace esag
