#include <cmath>

#include <gtest/gtest.h>

#include "esag/linalg.hpp"
#include "esag/rng.hpp"

namespace {

using esag::Matrix;
using esag::Vector;

Matrix random_symmetric(int n, esag::RandomStream& rng) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

TEST(Jacobi, EigenvaluesMatchEigenSolver) {
  esag::RandomStream rng(1);
  for (int n = 1; n <= 7; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix a = random_symmetric(n, rng);
      const auto eig = esag::jacobi_eigen(a);
      Eigen::SelfAdjointEigenSolver<Matrix> ref(a);
      EXPECT_LT((eig.values - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-12);
      for (int k = 1; k < n; ++k) EXPECT_LE(eig.values(k - 1), eig.values(k));
    }
  }
}

TEST(Jacobi, VectorsReconstructAndAreOrthonormal) {
  esag::RandomStream rng(2);
  for (int n = 2; n <= 6; ++n) {
    const Matrix a = random_symmetric(n, rng);
    const auto eig = esag::jacobi_eigen(a);
    const Matrix& v = eig.vectors;
    EXPECT_LT((v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((v * eig.values.asDiagonal() * v.transpose() - a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Jacobi, ReadsOnlyTheUpperTriangle) {
  esag::RandomStream rng(3);
  Matrix a = random_symmetric(4, rng);
  Matrix b = a;
  b(3, 0) = 99.0;
  b(2, 1) = -7.0;
  EXPECT_EQ(esag::jacobi_eigen(a).values, esag::jacobi_eigen(b).values);
}

TEST(Jacobi, DiagonalInputNeedsNoSweep) {
  Matrix a = Vector((Vector(3) << 3.0, -1.0, 2.0).finished()).asDiagonal();
  const auto eig = esag::jacobi_eigen(a);
  EXPECT_EQ(eig.values, (Vector(3) << -1.0, 2.0, 3.0).finished());
  EXPECT_EQ(eig.sweeps, 0);
}

TEST(Jacobi, RepeatedEigenvalues) {
  const Matrix a = 2.5 * Matrix::Identity(5, 5);
  const auto eig = esag::jacobi_eigen(a);
  EXPECT_TRUE(eig.values.isApproxToConstant(2.5));
}

TEST(Jacobi, InPlaceAgreesWithCopying) {
  esag::RandomStream rng(4);
  const Matrix a = random_symmetric(5, rng);
  Matrix work = a;
  Vector values;
  Matrix vectors;
  esag::jacobi_eigen_inplace(work, values, vectors);
  const auto eig = esag::jacobi_eigen(a);
  EXPECT_EQ(values, eig.values);
  EXPECT_EQ(vectors, eig.vectors);
}

TEST(Spectral, ExponentialMatchesSeries) {
  esag::RandomStream rng(5);
  const Matrix a = 0.3 * random_symmetric(4, rng);
  const Matrix e = esag::apply_spectral(esag::jacobi_eigen(a), [](double x) { return std::exp(x); });
  Matrix series = Matrix::Identity(4, 4);
  Matrix term = Matrix::Identity(4, 4);
  for (int k = 1; k < 30; ++k) {
    term = term * a / k;
    series += term;
  }
  EXPECT_LT((e - series).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(e.determinant(), std::exp(a.trace()), 1e-12);
}

}  // namespace
