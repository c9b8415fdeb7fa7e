#pragma once

#include <span>

#include "esag/linalg.hpp"
#include "esag/rng.hpp"

namespace esag {

/// Number of free shape parameters, (d - 2)(d + 1) / 2. Throws for d < 3.
int gamma_dim(int d);

/// Ambient dimension d matching a shape vector of length p, or -1.
int dim_from_gamma_dim(int p);

/// Orthonormal d x (d-1) basis of the complement of mu / |mu|, built from
/// the Householder reflection that sends mu / |mu| to -sign(mu_d) e_d.
/// Depends only on the direction of mu; mu = e_d gives the first d-1
/// identity columns.
Matrix complement_basis(const Vector& mu);

/// Symmetric traceless (d-1) x (d-1) matrix packed from gamma: the first
/// d-2 entries fill the diagonal (the last diagonal entry is minus their
/// sum), the rest fill the strict upper triangle row-major.
Matrix shape_matrix(const Vector& gamma, int d);

/// Inverse of shape_matrix for a symmetric traceless input.
Vector shape_vector(const Matrix& s);

struct CovarianceFactorization {
  Matrix V;
  Matrix Vinv;
  Matrix Vhalf;
  /// lambda_1 <= ... <= lambda_{d-1} followed by lambda_d = 1, the eigenvalue
  /// belonging to mu / |mu| (labelled last regardless of magnitude).
  Vector eigenvalues;
};

/// V = xi xi^T + E exp(S) E^T with xi = mu / |mu|, E = complement_basis(mu)
/// and S = shape_matrix(gamma). Satisfies V mu = mu and det V = 1.
CovarianceFactorization covariance_from(const Vector& mu, const Vector& gamma);

/// Immutable ESAG(mu, gamma) parameter set with its cached factorization.
class EsagParams {
 public:
  EsagParams(Vector mu, Vector gamma);

  int dim() const { return static_cast<int>(mu_.size()); }
  const Vector& mu() const { return mu_; }
  const Vector& gamma() const { return gamma_; }
  const CovarianceFactorization& cov() const { return cov_; }
  double concentration() const { return mu_.norm(); }
  Vector mean_direction() const { return mu_ / mu_.norm(); }

 private:
  Vector mu_;
  Vector gamma_;
  CovarianceFactorization cov_;
};

/// Log density of ESAG(mu, gamma) at the unit vector y, with respect to
/// surface measure on the sphere.
double log_density(const Vector& y, const EsagParams& params);

/// One draw W / |W| with W = mu + V^{1/2} Z.
Vector sample_one(const EsagParams& params, RandomStream& rng);

/// n draws, one per row.
RowMatrix sample(const EsagParams& params, int n, RandomStream& rng);

/// Allocation-free evaluation of the log density and its gradient with
/// respect to (mu, gamma) for many observations. The shape decomposition
/// and the Householder basis are recomputed only when gamma or mu change
/// between consecutive calls to set().
class DensityKernel {
 public:
  explicit DensityKernel(int d);

  int dim() const { return d_; }

  /// Returns false when |mu| is below `mu_floor`; evaluation is then invalid.
  bool set(std::span<const double> mu, std::span<const double> gamma,
           double mu_floor = 0.0);

  double log_density(std::span<const double> y);

  /// Log density plus gradients; grad_mu has d entries, grad_gamma p.
  double log_density_grad(std::span<const double> y, std::span<double> grad_mu,
                          std::span<double> grad_gamma);

  /// Quadratic form y^T V^{-1} y at the current parameters.
  double quad_inverse(std::span<const double> y);

 private:
  void prepare(std::span<const double> y);

  int d_;
  int m_;
  int p_;
  double constant_;

  // mu side
  Vector mu_;
  Vector xi_;
  Vector u_;
  double mu_norm_ = 0.0;
  double sign_ = 1.0;
  double tau_ = 0.0;
  bool mu_valid_ = false;

  // gamma side
  Vector gamma_;
  Matrix shape_;
  Matrix eigvec_;
  Vector eigval_;
  Vector exp_neg_;
  bool gamma_valid_ = false;

  // per observation
  Vector hy_;
  Vector z_;
  Vector w_;
  Vector c_;
  Vector scaled_;
  Matrix g_;
  Matrix tmp_;
  Matrix gs_;
  double q_ = 0.0;
  double alpha_ = 0.0;
  double uy_ = 0.0;
};

}  // namespace esag
