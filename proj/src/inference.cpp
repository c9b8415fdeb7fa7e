#include "esag/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "esag/error.hpp"

namespace esag {

std::string statistic_name(Statistic s) {
  switch (s) {
    case Statistic::RoC: return "RoC";
    case Statistic::D: return "D";
    case Statistic::M: return "M";
    case Statistic::LR: return "LR";
  }
  return "?";
}

Statistic parse_statistic(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "roc") return Statistic::RoC;
  if (t == "d") return Statistic::D;
  if (t == "m") return Statistic::M;
  if (t == "lr") return Statistic::LR;
  throw Error(ErrorKind::Misuse, "unknown statistic '" + text + "'");
}

namespace {

void check_pair(const FitResult& fit0, const FitResult& fitA) {
  if (fit0.mu_hat.rows() != fitA.mu_hat.rows() || fit0.mu_hat.cols() != fitA.mu_hat.cols())
    throw Error(ErrorKind::Misuse, "fits were computed on different datasets");
  if (fit0.mu_hat.rows() == 0) throw Error(ErrorKind::Misuse, "empty fit");
}

double null_norm(const FitResult& fit0, Eigen::Index i) {
  const double n0 = fit0.mu_hat.row(i).norm();
  if (!(n0 >= kMuFloor))
    throw Error(ErrorKind::DegenerateFit,
                "null fit has a vanishing mean at observation " + std::to_string(i + 1));
  return n0;
}

}  // namespace

double roc_statistic(const FitResult& fit0, const FitResult& fitA) {
  check_pair(fit0, fitA);
  const Eigen::Index n = fit0.mu_hat.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += fitA.mu_hat.row(i).norm() / null_norm(fit0, i);
  return sum / n;
}

double d_statistic(const FitResult& fit0, const FitResult& fitA) {
  check_pair(fit0, fitA);
  const Eigen::Index n = fit0.mu_hat.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double n0 = null_norm(fit0, i);
    const double na = fitA.mu_hat.row(i).norm();
    if (!(na >= kMuFloor))
      throw Error(ErrorKind::DegenerateFit,
                  "alternative fit has a vanishing mean at observation " + std::to_string(i + 1));
    const double cosine =
        std::clamp(fit0.mu_hat.row(i).dot(fitA.mu_hat.row(i)) / (n0 * na), -1.0, 1.0);
    sum += (2.0 - cosine) * (na / n0);
  }
  return sum / n;
}

namespace {

// Shared-draw Monte Carlo mean of (W / |W|)^2 with W = mu + H z; fixed
// dimensions let the inner loop unroll.
template <int D>
void moment_rows(const FitResult& fit0, const RowMatrix& z, RowMatrix& out) {
  using VecD = Eigen::Matrix<double, D, 1>;
  using MatD = Eigen::Matrix<double, D, D>;
  const Eigen::Index n = fit0.mu_hat.rows();
  const Eigen::Index d = fit0.mu_hat.cols();
  const Eigen::Index mc = z.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const EsagParams params = fit0.observation_params(static_cast<int>(i));
    const MatD half = params.cov().Vhalf.topLeftCorner(d, d);
    const VecD mu = params.mu().head(d);
    const VecD xi2 = params.mean_direction().head(d).array().square();
    VecD acc = VecD::Zero(d);
    for (Eigen::Index m = 0; m < mc; ++m) {
      const VecD w = mu + half * z.row(m).transpose();
      const double sq = w.squaredNorm();
      if (sq > 0.0)
        acc += w.cwiseAbs2() / sq;
      else
        acc += xi2;
    }
    out.row(i) = (acc / static_cast<double>(mc)).transpose();
  }
}

}  // namespace

RowMatrix null_second_moments(const FitResult& fit0, int mc_size, RandomStream& rng) {
  if (mc_size < 1) throw Error(ErrorKind::Contract, "mc_size must be at least 1");
  const Eigen::Index n = fit0.mu_hat.rows();
  const Eigen::Index d = fit0.mu_hat.cols();
  // One standard normal block shared by every observation.
  RowMatrix z(mc_size, d);
  for (int m = 0; m < mc_size; ++m)
    for (Eigen::Index j = 0; j < d; ++j) z(m, j) = rng.normal();
  RowMatrix out(n, d);
  switch (d) {
    case 3: moment_rows<3>(fit0, z, out); break;
    case 4: moment_rows<4>(fit0, z, out); break;
    case 5: moment_rows<5>(fit0, z, out); break;
    default: moment_rows<Eigen::Dynamic>(fit0, z, out); break;
  }
  return out;
}

double m_statistic(const Dataset& data, const RowMatrix& expected) {
  if (expected.rows() != data.n() || expected.cols() != data.d())
    throw Error(ErrorKind::Contract, "expectation matrix has wrong shape");
  Vector diff = Vector::Zero(data.d());
  for (int i = 0; i < data.n(); ++i)
    diff += (data.responses.row(i).array().square() - expected.row(i).array()).matrix().transpose();
  return (diff / data.n()).norm();
}

double m_statistic(const FitResult& fit0, const Dataset& data, int mc_size,
                   RandomStream& rng) {
  return m_statistic(data, null_second_moments(fit0, mc_size, rng));
}

double lr_statistic(const FitResult& fit0, const FitResult& fitA, double* deficit) {
  check_pair(fit0, fitA);
  if (!fit0.spec.nested_in(fitA.spec, static_cast<int>(fit0.coefficients.q())))
    throw Error(ErrorKind::Misuse, "likelihood ratio needs nested specifications");
  const double lr = 2.0 * (fitA.loglik - fit0.loglik);
  if (deficit) *deficit = lr < 0.0 ? -lr : 0.0;
  return std::max(0.0, lr);
}

FitSummary summarize(const FitResult& fit, int d, int q) {
  return {fit.spec.describe(), fit.loglik, fit.converged, fit.iterations,
          fit.spec.free_parameter_count(d, q)};
}

double bootstrap_p_value(double observed, std::span<const double> values, bool plus_one) {
  const auto s = std::count_if(values.begin(), values.end(),
                               [&](double v) { return v > observed; });
  const double b = static_cast<double>(values.size());
  if (plus_one) return (static_cast<double>(s) + 1.0) / (b + 1.0);
  if (values.empty()) return 1.0;
  return static_cast<double>(s) / b;
}

namespace {

bool needs_alt(Statistic s) { return s != Statistic::M; }

Dataset with_responses(const Dataset& data, RowMatrix responses) {
  Dataset out;
  out.responses = std::move(responses);
  out.covariates = data.covariates;
  out.record = data.record;
  return out;
}

RowMatrix draw_responses(const FitResult& fit, RandomStream& rng) {
  const Eigen::Index n = fit.mu_hat.rows();
  RowMatrix y(n, fit.mu_hat.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    y.row(i) = sample_one(fit.observation_params(static_cast<int>(i)), rng).transpose();
  return y;
}

OptimizerConfig replicate_config(const BootstrapConfig& config) {
  OptimizerConfig c = config.optimizer;
  c.restarts = config.replicate_restarts;
  c.use_init = false;
  return c;
}

struct StatValues {
  double value[4] = {0.0, 0.0, 0.0, 0.0};
  bool ok[4] = {false, false, false, false};
  double lr_deficit = 0.0;
};

// Evaluates the requested statistics on one dataset. Statistics that fail
// (degenerate fits) are left with ok = false.
StatValues evaluate(const Dataset& data, const FitResult& fit0, const FitResult* fitA,
                    std::span<const Statistic> stats, int mc_size, RandomStream& moment_rng) {
  StatValues out;
  for (Statistic s : stats) {
    const int k = static_cast<int>(s);
    try {
      switch (s) {
        case Statistic::RoC: out.value[k] = roc_statistic(fit0, *fitA); break;
        case Statistic::D: out.value[k] = d_statistic(fit0, *fitA); break;
        case Statistic::M: out.value[k] = m_statistic(fit0, data, mc_size, moment_rng); break;
        case Statistic::LR: out.value[k] = lr_statistic(fit0, *fitA, &out.lr_deficit); break;
      }
      out.ok[k] = std::isfinite(out.value[k]);
    } catch (const Error&) {
      out.ok[k] = false;
    }
  }
  return out;
}

struct Replicate {
  StatValues stats;
  bool null_converged = false;
  bool alt_converged = false;
  std::string failure;
};

std::string percent(double x) {
  std::ostringstream os;
  os.precision(3);
  os << 100.0 * x << "%";
  return os.str();
}

}  // namespace

std::vector<TestReport> bootstrap_test(const Dataset& data, const NullSpec& null_spec,
                                       const NullSpec& alt_spec,
                                       std::span<const Statistic> statistics,
                                       const BootstrapConfig& config) {
  data.validate();
  const int d = data.d();
  const int q = data.q();
  if (config.B < 1) throw Error(ErrorKind::Contract, "B must be at least 1");
  if (!null_spec.strictly_nested_in(alt_spec, q))
    throw Error(ErrorKind::Misuse, "null specification '" + null_spec.describe() +
                                       "' is not strictly nested in '" + alt_spec.describe() + "'");
  if (statistics.empty()) throw Error(ErrorKind::Misuse, "no statistic requested");
  const bool want_alt = std::any_of(statistics.begin(), statistics.end(), needs_alt);
  const std::uint64_t seed = config.seed;

  RandomStream null_rng = derive_stream(seed, {0, kTagNullFit});
  const FitResult fit0 = fit(data, null_spec, config.optimizer, null_rng);
  RandomStream alt_rng = derive_stream(seed, {0, kTagAltFit});
  std::vector<RegressionCoefficients> alt_warm{fit0.coefficients};
  const FitResult fitA = fit(data, alt_spec, config.optimizer, alt_rng, alt_warm);
  RandomStream moment_rng = derive_stream(seed, {0, kTagMoment});
  const StatValues observed = evaluate(data, fit0, &fitA, statistics, config.mc_size, moment_rng);

  const OptimizerConfig rep_config = replicate_config(config);
  std::vector<Replicate> reps(config.B);
  const int workers = std::max(1, config.workers);

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (int b = 1; b <= config.B; ++b) {
    Replicate& rep = reps[b - 1];
    try {
      const std::uint64_t ub = static_cast<std::uint64_t>(b);
      RandomStream data_rng = derive_stream(seed, {ub, kTagData});
      const Dataset boot = with_responses(data, draw_responses(fit0, data_rng));
      RandomStream rng0 = derive_stream(seed, {ub, kTagNullFit});
      std::vector<RegressionCoefficients> warm0{fit0.coefficients};
      const FitResult f0 = fit(boot, null_spec, rep_config, rng0, warm0);
      rep.null_converged = f0.converged;
      std::optional<FitResult> fA;
      if (want_alt) {
        RandomStream rngA = derive_stream(seed, {ub, kTagAltFit});
        std::vector<RegressionCoefficients> warmA{fitA.coefficients, f0.coefficients};
        fA = fit(boot, alt_spec, rep_config, rngA, warmA);
        rep.alt_converged = fA->converged;
      }
      RandomStream mrng = derive_stream(seed, {ub, kTagMoment});
      rep.stats = evaluate(boot, f0, fA ? &*fA : nullptr, statistics, config.mc_size, mrng);
    } catch (const std::exception& e) {
      rep.failure = e.what();
    }
  }

  std::vector<TestReport> reports;
  for (Statistic s : statistics) {
    const int k = static_cast<int>(s);
    TestReport r;
    r.statistic_name = statistic_name(s);
    r.B = config.B;
    r.seed = seed;
    r.mc_size = s == Statistic::M ? config.mc_size : 0;
    r.plus_one = config.plus_one;
    r.null_fit = summarize(fit0, d, q);
    r.alt_fit = summarize(fitA, d, q);
    if (!observed.ok[k])
      throw Error(ErrorKind::DegenerateFit,
                  "statistic " + r.statistic_name + " is undefined on the observed data");
    r.observed_value = observed.value[k];
    if (!fit0.converged) r.warnings.push_back("null fit did not converge");
    if (needs_alt(s) && !fitA.converged) r.warnings.push_back("alternative fit did not converge");
    if (s == Statistic::LR && observed.lr_deficit > 1e-6)
      r.warnings.push_back("alternative loglik below null loglik; LR floored at 0");
    int deficits = 0;
    for (int b = 1; b <= config.B; ++b) {
      const Replicate& rep = reps[b - 1];
      const bool ok = rep.failure.empty() && rep.null_converged &&
                      (!needs_alt(s) || rep.alt_converged) && rep.stats.ok[k];
      if (!ok) {
        r.excluded.push_back(b);
        continue;
      }
      if (s == Statistic::LR && rep.stats.lr_deficit > 1e-6) ++deficits;
      r.bootstrap_values.push_back(rep.stats.value[k]);
    }
    if (deficits > 0)
      r.warnings.push_back(std::to_string(deficits) +
                           " bootstrap LR values floored at 0 after an optimizer shortfall");
    const double frac = static_cast<double>(r.excluded.size()) / config.B;
    if (frac > 0.10)
      r.warnings.push_back("unreliable: " + percent(frac) +
                           " of bootstrap replicates excluded for non-convergence");
    r.p_value = bootstrap_p_value(r.observed_value, r.bootstrap_values, config.plus_one);
    reports.push_back(std::move(r));
  }
  return reports;
}

TestReport bootstrap_test(const Dataset& data, const NullSpec& null_spec,
                          const NullSpec& alt_spec, Statistic statistic,
                          const BootstrapConfig& config) {
  const Statistic one[1] = {statistic};
  return bootstrap_test(data, null_spec, alt_spec, one, config).front();
}

Vector gof_T(const FitResult& fit, const Dataset& data) {
  const int n = data.n();
  Vector t(n);
  for (int i = 0; i < n; ++i) {
    const EsagParams params = fit.observation_params(i);
    const Vector y = data.responses.row(i).transpose();
    const Vector c = params.mean_direction();
    const Vector r = y - c * c.dot(y);
    const auto& cov = params.cov();
    t(i) = (params.mu().squaredNorm() + cov.eigenvalues.sum()) * r.dot(cov.Vinv * r);
  }
  return t;
}

double ks_distance_chisq(const Vector& values, int dof) {
  if (values.size() == 0) throw Error(ErrorKind::Contract, "empty sample");
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  const boost::math::chi_squared dist(dof);
  const double n = static_cast<double>(v.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = v[i] <= 0.0 ? 0.0 : boost::math::cdf(dist, v[i]);
    ks = std::max({ks, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return ks;
}

GofReport gof_test(const Dataset& data, const NullSpec& spec, const BootstrapConfig& config) {
  data.validate();
  const int d = data.d();
  const int q = data.q();
  if (config.B < 0) throw Error(ErrorKind::Contract, "B must be nonnegative");
  const std::uint64_t seed = config.seed;

  RandomStream rng = derive_stream(seed, {0, kTagNullFit});
  const FitResult fitted = fit(data, spec, config.optimizer, rng);
  GofReport report;
  report.T = gof_T(fitted, data);
  report.mean_T = report.T.mean();
  report.ks = ks_distance_chisq(report.T, d - 1);
  report.B = config.B;
  report.seed = seed;
  report.fit = summarize(fitted, d, q);
  if (!fitted.converged) report.warnings.push_back("fit did not converge");

  const OptimizerConfig rep_config = replicate_config(config);
  std::vector<double> values(config.B, 0.0);
  std::vector<char> ok(config.B, 0);
  const int workers = std::max(1, config.workers);

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (int b = 1; b <= config.B; ++b) {
    try {
      const std::uint64_t ub = static_cast<std::uint64_t>(b);
      RandomStream data_rng = derive_stream(seed, {ub, kTagGof});
      const Dataset boot = with_responses(data, draw_responses(fitted, data_rng));
      RandomStream fit_rng = derive_stream(seed, {ub, kTagNullFit});
      std::vector<RegressionCoefficients> warm{fitted.coefficients};
      const FitResult f = fit(boot, spec, rep_config, fit_rng, warm);
      if (f.converged) {
        values[b - 1] = ks_distance_chisq(gof_T(f, boot), d - 1);
        ok[b - 1] = 1;
      }
    } catch (const std::exception&) {
    }
  }
  for (int b = 1; b <= config.B; ++b) {
    if (ok[b - 1])
      report.bootstrap_values.push_back(values[b - 1]);
    else
      report.excluded.push_back(b);
  }
  if (config.B > 0) {
    const double frac = static_cast<double>(report.excluded.size()) / config.B;
    if (frac > 0.10)
      report.warnings.push_back("unreliable: " + percent(frac) +
                                " of bootstrap replicates excluded for non-convergence");
    report.p_value = bootstrap_p_value(report.ks, report.bootstrap_values, config.plus_one);
  } else {
    report.p_value = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace esag
