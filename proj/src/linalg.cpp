#include "esag/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace esag {

namespace {

// Column-major element (i, j) of an n x n buffer.
inline double& at(double* m, Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  return m[j * n + i];
}

double off_diagonal_norm(double* a, Eigen::Index n) {
  double s = 0.0;
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) s += at(a, n, i, j) * at(a, n, i, j);
  return std::sqrt(2.0 * s);
}

}  // namespace

int jacobi_eigen_inplace(Matrix& a_mat, Vector& values, Matrix& vectors_mat,
                          const JacobiOptions& opts) {
  const Eigen::Index n = a_mat.rows();
  vectors_mat.setIdentity(n, n);
  values.resize(n);
  // Raw pointers keep the element accesses free of aliasing reloads.
  double* a = a_mat.data();
  double* v = vectors_mat.data();
  double frob = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      at(a, n, j, i) = at(a, n, i, j);
      frob += 2.0 * at(a, n, i, j) * at(a, n, i, j);
    }
    frob += at(a, n, j, j) * at(a, n, j, j);
  }

  const double scale = std::max(1.0, std::sqrt(frob));
  int sweep = 0;
  for (; sweep < opts.max_sweeps; ++sweep) {
    if (off_diagonal_norm(a, n) <= opts.off_diagonal_tol * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = at(a, n, p, q);
        if (apq == 0.0) continue;
        // Rutishauser's formulation: t = sgn(theta) / (|theta| + sqrt(theta^2 + 1)).
        const double theta = (at(a, n, q, q) - at(a, n, p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = at(a, n, k, p);
          const double akq = at(a, n, k, q);
          at(a, n, k, p) = c * akp - s * akq;
          at(a, n, k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = at(a, n, p, k);
          const double aqk = at(a, n, q, k);
          at(a, n, p, k) = c * apk - s * aqk;
          at(a, n, q, k) = s * apk + c * aqk;
        }
        at(a, n, p, q) = 0.0;
        at(a, n, q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = at(v, n, k, p);
          const double vkq = at(v, n, k, q);
          at(v, n, k, p) = c * vkp - s * vkq;
          at(v, n, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // Ascending order; insertion sort keeps it allocation free for small n.
  double* w = values.data();
  for (Eigen::Index i = 0; i < n; ++i) w[i] = at(a, n, i, i);
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = i; j > 0 && w[j - 1] > w[j]; --j) {
      std::swap(w[j - 1], w[j]);
      for (Eigen::Index k = 0; k < n; ++k) std::swap(at(v, n, k, j - 1), at(v, n, k, j));
    }
  }
  return sweep;
}

SymmetricEigen jacobi_eigen(const Matrix& a, const JacobiOptions& opts) {
  SymmetricEigen out;
  Matrix work = a;
  out.sweeps = jacobi_eigen_inplace(work, out.values, out.vectors, opts);
  return out;
}

}  // namespace esag
