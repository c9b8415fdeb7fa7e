#include "esag/distribution.hpp"

#include <cmath>
#include <string>

#include "esag/error.hpp"
#include "esag/special.hpp"

namespace esag {

int gamma_dim(int d) {
  if (d < 3)
    throw Error(ErrorKind::DimensionTooSmall,
                "ESAG needs dimension d >= 3, got d = " + std::to_string(d));
  return (d - 2) * (d + 1) / 2;
}

int dim_from_gamma_dim(int p) {
  for (int d = 3; gamma_dim(d) <= p; ++d)
    if (gamma_dim(d) == p) return d;
  return -1;
}

namespace {

void require_nonzero(const Vector& mu) {
  const double norm = mu.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw Error(ErrorKind::DegenerateMean,
                "mean vector must have finite nonzero norm");
}

// u = xi + sign(xi_d) e_d, never shorter than sqrt(2).
Vector householder_vector(const Vector& xi) {
  const Eigen::Index d = xi.size();
  Vector u = xi;
  u(d - 1) += xi(d - 1) >= 0.0 ? 1.0 : -1.0;
  return u;
}

}  // namespace

Matrix complement_basis(const Vector& mu) {
  require_nonzero(mu);
  const Eigen::Index d = mu.size();
  const Vector xi = mu / mu.norm();
  const Vector u = householder_vector(xi);
  const double tau = u.squaredNorm();
  Matrix h = Matrix::Identity(d, d) - (2.0 / tau) * u * u.transpose();
  return h.leftCols(d - 1);
}

Matrix shape_matrix(const Vector& gamma, int d) {
  const int p = gamma_dim(d);
  if (gamma.size() != p)
    throw Error(ErrorKind::Contract,
                "shape vector has " + std::to_string(gamma.size()) +
                    " entries, expected " + std::to_string(p));
  const int m = d - 1;
  Matrix s = Matrix::Zero(m, m);
  double trace = 0.0;
  for (int j = 0; j < m - 1; ++j) {
    s(j, j) = gamma(j);
    trace += gamma(j);
  }
  s(m - 1, m - 1) = -trace;
  int k = m - 1;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) s(i, j) = s(j, i) = gamma(k++);
  return s;
}

Vector shape_vector(const Matrix& s) {
  const int m = static_cast<int>(s.rows());
  const int d = m + 1;
  Vector gamma(gamma_dim(d));
  for (int j = 0; j < m - 1; ++j) gamma(j) = s(j, j);
  int k = m - 1;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) gamma(k++) = s(i, j);
  return gamma;
}

CovarianceFactorization covariance_from(const Vector& mu, const Vector& gamma) {
  require_nonzero(mu);
  const int d = static_cast<int>(mu.size());
  const Matrix s = shape_matrix(gamma, d);
  const SymmetricEigen eig = jacobi_eigen(s);
  const Vector xi = mu / mu.norm();
  const Matrix e = complement_basis(mu);
  const Matrix basis = e * eig.vectors;

  auto assemble = [&](auto f) {
    const Vector fv = eig.values.unaryExpr(f);
    Matrix out = xi * xi.transpose();
    out.noalias() += basis * fv.asDiagonal() * basis.transpose();
    return Matrix(0.5 * (out + out.transpose()));
  };

  CovarianceFactorization cov;
  cov.V = assemble([](double x) { return std::exp(x); });
  cov.Vinv = assemble([](double x) { return std::exp(-x); });
  cov.Vhalf = assemble([](double x) { return std::exp(0.5 * x); });
  cov.eigenvalues.resize(d);
  for (int j = 0; j < d - 1; ++j) cov.eigenvalues(j) = std::exp(eig.values(j));
  cov.eigenvalues(d - 1) = 1.0;
  return cov;
}

EsagParams::EsagParams(Vector mu, Vector gamma)
    : mu_(std::move(mu)), gamma_(std::move(gamma)) {
  const int d = static_cast<int>(mu_.size());
  const int p = gamma_dim(d);
  if (gamma_.size() != p)
    throw Error(ErrorKind::Contract,
                "shape vector has " + std::to_string(gamma_.size()) +
                    " entries, expected " + std::to_string(p));
  cov_ = covariance_from(mu_, gamma_);
}

double log_density(const Vector& y, const EsagParams& params) {
  const int d = params.dim();
  const double q = y.dot(params.cov().Vinv * y);
  const double alpha = y.dot(params.mu()) / std::sqrt(q);
  const double mu2 = params.mu().squaredNorm();
  return -0.5 * (d - 1) * kLogTwoPi - 0.5 * d * std::log(q) +
         0.5 * (alpha * alpha - mu2) + log_mnorm_moment(d - 1, alpha).log_value;
}

Vector sample_one(const EsagParams& params, RandomStream& rng) {
  const int d = params.dim();
  Vector z(d);
  Vector w(d);
  for (;;) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    w.noalias() = params.mu() + params.cov().Vhalf * z;
    const double norm = w.norm();
    if (norm >= 1e-300) return w / norm;
  }
}

RowMatrix sample(const EsagParams& params, int n, RandomStream& rng) {
  const int d = params.dim();
  RowMatrix out(n, d);
  for (int i = 0; i < n; ++i) out.row(i) = sample_one(params, rng).transpose();
  return out;
}

// ---------------------------------------------------------------------------

DensityKernel::DensityKernel(int d)
    : d_(d),
      m_(d - 1),
      p_(gamma_dim(d)),
      constant_(-0.5 * (d - 1) * kLogTwoPi),
      mu_(Vector::Zero(d)),
      xi_(d),
      u_(d),
      gamma_(Vector::Zero(p_)),
      shape_(m_, m_),
      eigvec_(m_, m_),
      eigval_(m_),
      exp_neg_(m_),
      hy_(d),
      z_(m_),
      w_(m_),
      c_(m_),
      scaled_(m_),
      g_(m_, m_),
      tmp_(m_, m_),
      gs_(m_, m_) {}

bool DensityKernel::set(std::span<const double> mu, std::span<const double> gamma,
                        double mu_floor) {
  bool mu_same = mu_valid_;
  for (int j = 0; j < d_ && mu_same; ++j) mu_same = mu_(j) == mu[j];
  if (!mu_same) {
    for (int j = 0; j < d_; ++j) mu_(j) = mu[j];
    mu_norm_ = mu_.norm();
    mu_valid_ = std::isfinite(mu_norm_) && mu_norm_ > 0.0;
    if (mu_valid_) {
      xi_ = mu_ / mu_norm_;
      sign_ = xi_(d_ - 1) >= 0.0 ? 1.0 : -1.0;
      u_ = xi_;
      u_(d_ - 1) += sign_;
      tau_ = u_.squaredNorm();
    }
  }

  bool gamma_same = gamma_valid_;
  for (int j = 0; j < p_ && gamma_same; ++j) gamma_same = gamma_(j) == gamma[j];
  if (!gamma_same) {
    for (int j = 0; j < p_; ++j) gamma_(j) = gamma[j];
    double trace = 0.0;
    for (int j = 0; j < m_ - 1; ++j) {
      shape_(j, j) = gamma_(j);
      trace += gamma_(j);
    }
    shape_(m_ - 1, m_ - 1) = -trace;
    int k = m_ - 1;
    for (int i = 0; i < m_; ++i)
      for (int j = i + 1; j < m_; ++j) shape_(i, j) = shape_(j, i) = gamma_(k++);
    jacobi_eigen_inplace(shape_, eigval_, eigvec_);
    exp_neg_ = (-eigval_).array().exp();
    gamma_valid_ = gamma_.allFinite();
  }
  return mu_valid_ && gamma_valid_ && mu_norm_ > mu_floor;
}

void DensityKernel::prepare(std::span<const double> y) {
  double xy = 0.0;
  uy_ = 0.0;
  for (int j = 0; j < d_; ++j) {
    xy += xi_(j) * y[j];
    uy_ += u_(j) * y[j];
  }
  const double f = 2.0 * uy_ / tau_;
  for (int j = 0; j < d_; ++j) hy_(j) = y[j] - f * u_(j);
  z_ = hy_.head(m_);
  w_.noalias() = eigvec_.transpose() * z_;
  q_ = xy * xy;
  for (int j = 0; j < m_; ++j) q_ += exp_neg_(j) * w_(j) * w_(j);
  alpha_ = mu_norm_ * xy / std::sqrt(q_);
}

double DensityKernel::quad_inverse(std::span<const double> y) {
  prepare(y);
  return q_;
}

double DensityKernel::log_density(std::span<const double> y) {
  prepare(y);
  return constant_ - 0.5 * d_ * std::log(q_) +
         0.5 * (alpha_ * alpha_ - mu_norm_ * mu_norm_) +
         log_mnorm_moment(d_ - 1, alpha_).log_value;
}

double DensityKernel::log_density_grad(std::span<const double> y,
                                       std::span<double> grad_mu,
                                       std::span<double> grad_gamma) {
  prepare(y);
  const MomentLog lm = log_mnorm_moment(d_ - 1, alpha_);
  const double value = constant_ - 0.5 * d_ * std::log(q_) +
                       0.5 * (alpha_ * alpha_ - mu_norm_ * mu_norm_) +
                       lm.log_value;
  const double sq = std::sqrt(q_);
  const double ag = alpha_ + lm.log_derivative;
  const double dq = (-0.5 * d_ - 0.5 * alpha_ * ag) / q_;

  // d q / d mu through the Householder basis: q = |y|^2 + z^T (e^{-S} - I) z.
  scaled_ = (exp_neg_.array() - 1.0) * w_.array();
  c_.noalias() = eigvec_ * scaled_;
  double cu = 0.0;
  for (int j = 0; j < m_; ++j) cu += c_(j) * u_(j);
  // grad_u = -2 [uy c_hat + cu y] / tau + 4 cu uy u / tau^2, c_hat = (c, 0)
  const double a1 = -2.0 * uy_ / tau_;
  const double a2 = -2.0 * cu / tau_;
  const double a3 = 4.0 * cu * uy_ / (tau_ * tau_);
  double proj = 0.0;
  for (int j = 0; j < d_; ++j) {
    const double ch = j < m_ ? c_(j) : 0.0;
    hy_(j) = a1 * ch + a2 * y[j] + a3 * u_(j);  // reuse as grad_u
    proj += xi_(j) * hy_(j);
  }
  const double scale = 2.0 / mu_norm_;
  for (int j = 0; j < d_; ++j) {
    const double grad_q = scale * (hy_(j) - proj * xi_(j));
    grad_mu[j] = ag * y[j] / sq - mu_(j) + dq * grad_q;
  }

  // d q / d S = -P (Lambda o w w^T) P^T with Lambda the divided differences
  // of exp at -sigma.
  for (int i = 0; i < m_; ++i) {
    g_(i, i) = -exp_neg_(i) * w_(i) * w_(i);
    for (int j = i + 1; j < m_; ++j) {
      const double diff = eigval_(j) - eigval_(i);
      const double lam = diff == 0.0 ? exp_neg_(i) : exp_neg_(j) * std::expm1(diff) / diff;
      g_(i, j) = g_(j, i) = -lam * w_(i) * w_(j);
    }
  }
  tmp_.noalias() = eigvec_ * g_;
  gs_.noalias() = tmp_ * eigvec_.transpose();
  const Matrix& gs = gs_;
  for (int j = 0; j < m_ - 1; ++j) grad_gamma[j] = dq * (gs(j, j) - gs(m_ - 1, m_ - 1));
  int k = m_ - 1;
  for (int i = 0; i < m_; ++i)
    for (int j = i + 1; j < m_; ++j) grad_gamma[k++] = dq * 2.0 * gs(i, j);
  return value;
}

}  // namespace esag
