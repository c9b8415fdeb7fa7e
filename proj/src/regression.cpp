#include "esag/regression.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "esag/error.hpp"
#include "esag/optimize.hpp"

namespace esag {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kParallelThreshold = 64;

}  // namespace

// ---------------------------------------------------------------------------
// Standardization

Vector StandardizationRecord::apply(const Vector& raw) const {
  if (raw.size() != size())
    throw Error(ErrorKind::Contract, "covariate vector has wrong length");
  Vector out(raw.size());
  for (int k = 0; k < size(); ++k) out(k) = (raw(k) - min[k]) / range[k] + 1.0;
  return out;
}

bool StandardizationRecord::covers(const Vector& raw) const {
  for (int k = 0; k < size(); ++k)
    if (raw(k) < min[k] || raw(k) > min[k] + range[k]) return false;
  return true;
}

std::pair<RowMatrix, StandardizationRecord> standardize_covariates(
    const RowMatrix& raw, const std::vector<std::string>& names) {
  StandardizationRecord rec;
  RowMatrix out(raw.rows(), raw.cols());
  for (Eigen::Index k = 0; k < raw.cols(); ++k) {
    const double lo = raw.col(k).minCoeff();
    const double hi = raw.col(k).maxCoeff();
    const double range = hi - lo;
    if (!(range > 0.0)) {
      const std::string name =
          k < static_cast<Eigen::Index>(names.size()) ? names[k] : std::to_string(k);
      throw Error(ErrorKind::ZeroRange, "covariate column '" + name + "' has zero range");
    }
    rec.min.push_back(lo);
    rec.range.push_back(range);
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      // Endpoints map exactly onto 1 and 2.
      if (raw(i, k) == lo)
        out(i, k) = 1.0;
      else if (raw(i, k) == hi)
        out(i, k) = 2.0;
      else
        out(i, k) = (raw(i, k) - lo) / range + 1.0;
    }
  }
  return {std::move(out), std::move(rec)};
}

void Dataset::validate(double unit_tol) const {
  if (n() < 1) throw Error(ErrorKind::Contract, "dataset has no observations");
  gamma_dim(d());
  if (covariates.rows() != responses.rows())
    throw Error(ErrorKind::Contract, "covariate and response row counts differ");
  for (int i = 0; i < n(); ++i)
    if (std::abs(responses.row(i).norm() - 1.0) > unit_tol)
      throw Error(ErrorKind::Contract, "response row " + std::to_string(i) + " is not a unit vector");
}

// ---------------------------------------------------------------------------
// Coefficients and null specifications

RegressionCoefficients RegressionCoefficients::zeros(int d, int q) {
  const int p = gamma_dim(d);
  return {Vector::Zero(d), Matrix::Zero(d, q), Vector::Zero(p), Matrix::Zero(p, q)};
}

bool NullSpec::alpha_column_free(int k) const {
  return !freeze_A1 && !frozen_alpha_columns.contains(k);
}

bool NullSpec::beta_column_free(int k) const {
  return !freeze_B1 && !frozen_beta_columns.contains(k);
}

int NullSpec::free_parameter_count(int d, int q) const {
  const int p = gamma_dim(d);
  int count = d;
  for (int k = 1; k <= q; ++k) {
    if (alpha_column_free(k)) count += d;
    if (beta_column_free(k)) count += p;
  }
  if (beta0_free()) count += p;
  return count;
}

bool NullSpec::nested_in(const NullSpec& other, int q) const {
  if (beta0_free() && !other.beta0_free()) return false;
  for (int k = 1; k <= q; ++k) {
    if (alpha_column_free(k) && !other.alpha_column_free(k)) return false;
    if (beta_column_free(k) && !other.beta_column_free(k)) return false;
  }
  return true;
}

bool NullSpec::strictly_nested_in(const NullSpec& other, int q) const {
  if (!nested_in(other, q)) return false;
  // d only scales the counts; any valid dimension will do.
  return free_parameter_count(3, q) < other.free_parameter_count(3, q);
}

void NullSpec::apply(RegressionCoefficients& c) const {
  if (!beta0_free()) c.beta0.setZero();
  for (int k = 1; k <= c.q(); ++k) {
    if (!alpha_column_free(k)) c.A1.col(k - 1).setZero();
    if (!beta_column_free(k)) c.B1.col(k - 1).setZero();
  }
}

std::string NullSpec::describe() const {
  std::ostringstream os;
  if (freeze_beta0 && freeze_B1)
    os << (freeze_A1 ? "isotropic-mean" : "isotropic");
  else if (freeze_A1 && !freeze_B1 && !freeze_beta0)
    os << "mean";
  else if (freeze_B1 && !freeze_A1 && !freeze_beta0)
    os << "shape";
  else if (!freeze_A1 && !freeze_B1 && !freeze_beta0)
    os << "full";
  else
    os << "A1:" << freeze_A1 << ",B1:" << freeze_B1 << ",beta0:" << freeze_beta0;
  for (int k : frozen_alpha_columns) os << ",alpha:" << k;
  for (int k : frozen_beta_columns) os << ",beta:" << k;
  return os.str();
}

NullSpec parse_null_spec(const std::string& text) {
  NullSpec spec;
  std::stringstream ss(text);
  std::string token;
  bool first = true;
  while (std::getline(ss, token, ',')) {
    if (first) {
      first = false;
      if (token == "isotropic" || token == "V")
        spec = NullSpec::isotropic();
      else if (token == "mean" || token == "mu")
        spec = NullSpec::mean_intercept_only();
      else if (token == "shape" || token == "gamma")
        spec = NullSpec::shape_intercept_only();
      else if (token == "isotropic-mean")
        spec = NullSpec{true, true, true, {}, {}};
      else if (token == "full" || token.empty())
        spec = NullSpec::unrestricted();
      else
        throw Error(ErrorKind::Misuse, "unknown null specification '" + token + "'");
      continue;
    }
    const auto colon = token.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::Misuse, "bad column restriction '" + token + "'");
    const std::string block = token.substr(0, colon);
    const int k = std::stoi(token.substr(colon + 1));
    if (k < 1) throw Error(ErrorKind::Misuse, "covariate columns are numbered from 1");
    if (block == "alpha")
      spec.frozen_alpha_columns.insert(k);
    else if (block == "beta")
      spec.frozen_beta_columns.insert(k);
    else
      throw Error(ErrorKind::Misuse, "bad column restriction '" + token + "'");
  }
  return spec;
}

Vector pack_free(const RegressionCoefficients& c, const NullSpec& spec) {
  const int d = c.d();
  const int q = c.q();
  const int p = c.p();
  Vector theta(spec.free_parameter_count(d, q));
  Eigen::Index at = 0;
  theta.segment(at, d) = c.alpha0;
  at += d;
  for (int k = 1; k <= q; ++k)
    if (spec.alpha_column_free(k)) {
      theta.segment(at, d) = c.A1.col(k - 1);
      at += d;
    }
  if (spec.beta0_free()) {
    theta.segment(at, p) = c.beta0;
    at += p;
  }
  for (int k = 1; k <= q; ++k)
    if (spec.beta_column_free(k)) {
      theta.segment(at, p) = c.B1.col(k - 1);
      at += p;
    }
  return theta;
}

RegressionCoefficients unpack_free(const Vector& theta, const NullSpec& spec, int d,
                                   int q) {
  RegressionCoefficients c = RegressionCoefficients::zeros(d, q);
  const int p = c.p();
  Eigen::Index at = 0;
  c.alpha0 = theta.segment(at, d);
  at += d;
  for (int k = 1; k <= q; ++k)
    if (spec.alpha_column_free(k)) {
      c.A1.col(k - 1) = theta.segment(at, d);
      at += d;
    }
  if (spec.beta0_free()) {
    c.beta0 = theta.segment(at, p);
    at += p;
  }
  for (int k = 1; k <= q; ++k)
    if (spec.beta_column_free(k)) {
      c.B1.col(k - 1) = theta.segment(at, p);
      at += p;
    }
  return c;
}

// ---------------------------------------------------------------------------
// Likelihood

namespace {

void check_dims(const RegressionCoefficients& c, const Dataset& data) {
  if (c.d() != data.d() || c.q() != data.q() || c.p() != gamma_dim(data.d()))
    throw Error(ErrorKind::Contract, "coefficient dimensions do not match the dataset");
}

double sum_terms(const std::vector<double>& terms) {
  double total = 0.0;
  for (double t : terms) {
    if (!std::isfinite(t)) return kNegInf;
    total += t;
  }
  return total;
}

double loglik_impl(const RegressionCoefficients& c, const Dataset& data, bool parallel) {
  check_dims(c, data);
  const int n = data.n();
  const int d = data.d();
  const int p = c.p();
  std::vector<double> terms(n);
#pragma omp parallel if (parallel && n >= kParallelThreshold)
  {
    DensityKernel kernel(d);
    Vector mu(d);
    Vector gamma(p);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto x = data.covariates.row(i).transpose();
      mu.noalias() = c.alpha0 + c.A1 * x;
      gamma.noalias() = c.beta0 + c.B1 * x;
      if (!kernel.set({mu.data(), size_t(d)}, {gamma.data(), size_t(p)}, kMuFloor)) {
        terms[i] = kNegInf;
        continue;
      }
      terms[i] = kernel.log_density({data.responses.row(i).data(), size_t(d)});
    }
  }
  return sum_terms(terms);
}

double loglik_grad_impl(const RegressionCoefficients& c, const Dataset& data,
                        const NullSpec& spec, Vector& grad, bool parallel) {
  check_dims(c, data);
  const int n = data.n();
  const int d = data.d();
  const int q = data.q();
  const int p = c.p();
  std::vector<double> terms(n);
  RowMatrix gmu(n, d);
  RowMatrix ggamma(n, p);
#pragma omp parallel if (parallel && n >= kParallelThreshold)
  {
    DensityKernel kernel(d);
    Vector mu(d);
    Vector gamma(p);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto x = data.covariates.row(i).transpose();
      mu.noalias() = c.alpha0 + c.A1 * x;
      gamma.noalias() = c.beta0 + c.B1 * x;
      if (!kernel.set({mu.data(), size_t(d)}, {gamma.data(), size_t(p)}, kMuFloor)) {
        terms[i] = kNegInf;
        gmu.row(i).setZero();
        ggamma.row(i).setZero();
        continue;
      }
      terms[i] = kernel.log_density_grad({data.responses.row(i).data(), size_t(d)},
                                         {gmu.row(i).data(), size_t(d)},
                                         {ggamma.row(i).data(), size_t(p)});
    }
  }
  RegressionCoefficients g = RegressionCoefficients::zeros(d, q);
  for (int i = 0; i < n; ++i) {
    g.alpha0 += gmu.row(i).transpose();
    g.beta0 += ggamma.row(i).transpose();
    for (int k = 0; k < q; ++k) {
      const double x = data.covariates(i, k);
      g.A1.col(k) += x * gmu.row(i).transpose();
      g.B1.col(k) += x * ggamma.row(i).transpose();
    }
  }
  grad = pack_free(g, spec);
  return sum_terms(terms);
}

}  // namespace

double loglik(const RegressionCoefficients& coeffs, const Dataset& data) {
  return loglik_impl(coeffs, data, true);
}

double loglik_serial(const RegressionCoefficients& coeffs, const Dataset& data) {
  return loglik_impl(coeffs, data, false);
}

double loglik_grad(const RegressionCoefficients& coeffs, const Dataset& data,
                   const NullSpec& spec, Vector& grad) {
  return loglik_grad_impl(coeffs, data, spec, grad, true);
}

double loglik_grad_serial(const RegressionCoefficients& coeffs, const Dataset& data,
                          const NullSpec& spec, Vector& grad) {
  return loglik_grad_impl(coeffs, data, spec, grad, false);
}

// ---------------------------------------------------------------------------
// Fitting

RegressionCoefficients init_coefficients(const Dataset& data, const NullSpec& spec) {
  const int d = data.d();
  RegressionCoefficients c = RegressionCoefficients::zeros(d, data.q());
  const Vector ybar = data.responses.colwise().mean().transpose();
  const double r = ybar.norm();
  if (r >= 1.0 - 1e-12)
    throw Error(ErrorKind::DegenerateData,
                "all responses coincide; the mean resultant length is 1");
  const double conc = r * (d - r * r) / (1.0 - r * r);
  if (r > 0.0) c.alpha0 = conc * ybar / r;
  if (c.alpha0.norm() < 0.1) {
    Vector dir = Vector::Zero(d);
    if (r > 0.0)
      dir = ybar / r;
    else
      dir(0) = 1.0;
    c.alpha0 = 0.1 * dir;
  }
  spec.apply(c);
  return c;
}

EsagParams FitResult::observation_params(int i) const {
  return EsagParams(mu_hat.row(i).transpose(), gamma_hat.row(i).transpose());
}

FitResult make_fit_result(const RegressionCoefficients& coeffs, const NullSpec& spec,
                          const Dataset& data) {
  FitResult r;
  r.coefficients = coeffs;
  r.spec = spec;
  const int n = data.n();
  r.mu_hat.resize(n, data.d());
  r.gamma_hat.resize(n, coeffs.p());
  for (int i = 0; i < n; ++i) {
    const Vector x = data.covariates.row(i).transpose();
    r.mu_hat.row(i) = coeffs.mu_at(x).transpose();
    r.gamma_hat.row(i) = coeffs.gamma_at(x).transpose();
  }
  r.loglik = loglik(coeffs, data);
  return r;
}

namespace {

MinimizeResult run_optimizer(const Dataset& data, const NullSpec& spec,
                             const OptimizerConfig& config, const Vector& start) {
  const int d = data.d();
  const int q = data.q();
  const double scale = 1.0 / data.n();
  const int budget = config.max_iter_per_param * std::max<int>(1, start.size());
  if (config.method == OptimizerMethod::NelderMead) {
    NelderMeadOptions opts;
    opts.rel_tol = config.rel_tol;
    opts.max_iterations = budget;
    auto f = [&](const Vector& theta) {
      return -scale * loglik(unpack_free(theta, spec, d, q), data);
    };
    return nelder_mead(f, start, opts);
  }
  BfgsOptions opts;
  opts.grad_tol = config.grad_tol;
  opts.rel_tol = 1e-14;
  opts.max_iterations = budget;
  auto fg = [&](const Vector& theta, Vector& grad) {
    const double v = loglik_grad(unpack_free(theta, spec, d, q), data, spec, grad);
    grad *= -scale;
    return -scale * v;
  };
  return bfgs(fg, start, opts);
}

}  // namespace

FitResult fit(const Dataset& data, const NullSpec& spec, const OptimizerConfig& config,
              RandomStream& rng, std::span<const RegressionCoefficients> warm_starts) {
  const int d = data.d();
  const int q = data.q();
  const int free = spec.free_parameter_count(d, q);

  std::vector<Vector> starts;
  if (config.use_init || warm_starts.empty())
    starts.push_back(pack_free(init_coefficients(data, spec), spec));
  // gamma-free stage: the likelihood is smooth in mu when gamma = 0, so a
  // mean-only fit gives a start that keeps mean directions in one chart.
  const bool gamma_free = spec.beta0_free() || !spec.freeze_B1;
  if (gamma_free && warm_starts.empty()) {
    NullSpec stage = spec;
    stage.freeze_beta0 = true;
    stage.freeze_B1 = true;
    MinimizeResult r = run_optimizer(data, stage, config,
                                     pack_free(init_coefficients(data, stage), stage));
    starts.push_back(pack_free(unpack_free(r.x, stage, d, q), spec));
  }
  for (const auto& w : warm_starts) {
    RegressionCoefficients c = w;
    spec.apply(c);
    starts.push_back(pack_free(c, spec));
  }

  MinimizeResult best;
  best.value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  auto consider = [&](const Vector& start) {
    MinimizeResult r = run_optimizer(data, spec, config, start);
    iterations += r.iterations;
    evaluations += r.evaluations;
    if (best.x.size() == 0 || r.value < best.value) best = std::move(r);
  };
  for (const auto& s : starts) consider(s);
  for (int r = 0; r < config.restarts; ++r) {
    Vector start = best.x;
    for (Eigen::Index j = 0; j < start.size(); ++j)
      start(j) += config.perturbation * rng.normal();
    consider(start);
  }

  RegressionCoefficients coeffs = unpack_free(best.x, spec, d, q);
  FitResult result = make_fit_result(coeffs, spec, data);
  result.converged = best.converged && std::isfinite(result.loglik);
  result.iterations = iterations;
  result.evaluations = evaluations;
  result.underdetermined = data.n() < free;
  return result;
}

Prediction predict_params(const RegressionCoefficients& coeffs, const Vector& x,
                          const std::optional<StandardizationRecord>& record) {
  if (x.size() != coeffs.q())
    throw Error(ErrorKind::Contract, "covariate vector has wrong length");
  Vector xs = x;
  bool extrapolated = false;
  if (record) {
    xs = record->apply(x);
    extrapolated = !record->covers(x);
  }
  return {EsagParams(coeffs.mu_at(xs), coeffs.gamma_at(xs)), extrapolated};
}

}  // namespace esag
