#pragma once

#include <Eigen/Dense>

namespace esag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Row-major storage for observation-per-row data so each row is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct JacobiOptions {
  double off_diagonal_tol = 1e-13;
  int max_sweeps = 100;
};

/// Eigendecomposition A = V diag(values) V^T of a symmetric matrix.
/// Values are sorted ascending and vectors are the matching columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
  int sweeps = 0;
};

/// Cyclic Jacobi rotations. Only the upper triangle of `a` is read.
SymmetricEigen jacobi_eigen(const Matrix& a, const JacobiOptions& opts = {});

/// In-place variant reusing caller storage; `a` is overwritten. Returns the
/// number of sweeps performed.
int jacobi_eigen_inplace(Matrix& a, Vector& values, Matrix& vectors,
                          const JacobiOptions& opts = {});

/// V diag(f(values)) V^T.
template <typename F>
Matrix apply_spectral(const SymmetricEigen& eig, F&& f) {
  Vector fv = eig.values.unaryExpr(f);
  return eig.vectors * fv.asDiagonal() * eig.vectors.transpose();
}

}  // namespace esag
