#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "esag/distribution.hpp"
#include "esag/error.hpp"
#include "esag/special.hpp"
#include "oracles.hpp"

namespace {

using esag::EsagParams;
using esag::Matrix;
using esag::Vector;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::span<const double> sp(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> sp(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Vector random_unit(int d, esag::RandomStream& rng) {
  Vector y(d);
  for (int i = 0; i < d; ++i) y(i) = rng.normal();
  return y.normalized();
}

Vector random_vec(int n, double scale, esag::RandomStream& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

TEST(GammaDim, Values) {
  EXPECT_EQ(esag::gamma_dim(3), 2);
  EXPECT_EQ(esag::gamma_dim(4), 5);
  EXPECT_EQ(esag::gamma_dim(5), 9);
  EXPECT_THROW(esag::gamma_dim(2), esag::Error);
  for (int d = 3; d < 9; ++d) EXPECT_EQ(esag::dim_from_gamma_dim(esag::gamma_dim(d)), d);
  EXPECT_EQ(esag::dim_from_gamma_dim(3), -1);
}

TEST(ShapeMatrix, PackingMatchesOracleAndRoundTrips) {
  esag::RandomStream rng(11);
  for (int d = 3; d <= 6; ++d) {
    const Vector g = random_vec(esag::gamma_dim(d), 1.0, rng);
    const Matrix s = esag::shape_matrix(g, d);
    EXPECT_LT((s - oracle::shape(g, d)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(s.trace(), 0.0, 1e-14);
    EXPECT_LT((esag::shape_vector(s) - g).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(ShapeMatrix, ThreeDimensionalLayout) {
  const Matrix s = esag::shape_matrix(vec({0.4, -0.7}), 3);
  EXPECT_DOUBLE_EQ(s(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(s(1, 1), -0.4);
  EXPECT_DOUBLE_EQ(s(0, 1), -0.7);
  EXPECT_DOUBLE_EQ(s(1, 0), -0.7);
}

TEST(ComplementBasis, OrthonormalAndOrthogonalToMu) {
  esag::RandomStream rng(12);
  for (int d = 3; d <= 6; ++d) {
    for (int rep = 0; rep < 10; ++rep) {
      Vector mu = random_vec(d, 2.0, rng);
      if (rep == 0) mu(d - 1) = -std::abs(mu(d - 1));
      const Matrix e = esag::complement_basis(mu);
      EXPECT_LT((e.transpose() * e - Matrix::Identity(d - 1, d - 1)).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LT((e.transpose() * mu).cwiseAbs().maxCoeff(), 1e-13);
      EXPECT_LT((e - oracle::complement(mu)).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(ComplementBasis, PoleGivesIdentityColumns) {
  const Matrix e = esag::complement_basis(vec({0, 0, 3}));
  EXPECT_LT((e - Matrix::Identity(3, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ComplementBasis, DependsOnlyOnDirection) {
  const Vector mu = vec({0.3, -1.2, 0.8, 2.0});
  EXPECT_EQ(esag::complement_basis(mu), esag::complement_basis(2.0 * mu));
  EXPECT_LT((esag::complement_basis(mu) - esag::complement_basis(7.5 * mu)).cwiseAbs().maxCoeff(),
            1e-15);
}

TEST(ComplementBasis, ZeroMuIsDegenerate) {
  EXPECT_THROW(esag::complement_basis(Vector::Zero(3)), esag::Error);
}

TEST(Covariance, ConstraintsHold) {
  esag::RandomStream rng(13);
  for (int d = 3; d <= 6; ++d) {
    for (int rep = 0; rep < 10; ++rep) {
      const Vector mu = random_vec(d, 2.0, rng);
      const Vector g = random_vec(esag::gamma_dim(d), 0.8, rng);
      const auto c = esag::covariance_from(mu, g);
      EXPECT_LT((c.V * mu - mu).norm(), 1e-12 * mu.norm());
      EXPECT_NEAR(c.V.determinant(), 1.0, 1e-11);
      EXPECT_LT((c.V - c.V.transpose()).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LT((c.V * c.Vinv - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-11);
      EXPECT_LT((c.Vhalf * c.Vhalf - c.V).cwiseAbs().maxCoeff(), 1e-11);
      EXPECT_LT((c.V - oracle::covariance(mu, g)).cwiseAbs().maxCoeff(), 1e-11);
      EXPECT_DOUBLE_EQ(c.eigenvalues(d - 1), 1.0);
      EXPECT_NEAR(c.eigenvalues.head(d - 1).array().log().sum(), 0.0, 1e-12);
    }
  }
}

TEST(Covariance, DiagonalShapeEigenvalues) {
  const double g = 0.8;
  const auto c = esag::covariance_from(vec({0.4, 1.0, -0.3}), vec({g, 0.0}));
  Eigen::SelfAdjointEigenSolver<Matrix> ref(c.V);
  EXPECT_NEAR(ref.eigenvalues()(0), std::exp(-g), 1e-13);
  EXPECT_NEAR(ref.eigenvalues()(1), 1.0, 1e-13);
  EXPECT_NEAR(ref.eigenvalues()(2), std::exp(g), 1e-13);
}

TEST(Covariance, ZeroGammaIsIdentity) {
  const auto c = esag::covariance_from(vec({1, 2, -2}), Vector::Zero(2));
  EXPECT_LT((c.V - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Density, MatchesQuadratureOracle) {
  esag::RandomStream rng(14);
  for (int d = 3; d <= 5; ++d) {
    for (int rep = 0; rep < 8; ++rep) {
      const Vector mu = random_vec(d, 1.5, rng);
      const Vector g = random_vec(esag::gamma_dim(d), 0.5, rng);
      const EsagParams p(mu, g);
      const Vector y = random_unit(d, rng);
      const double ref = oracle::density(y, mu, oracle::covariance(mu, g));
      EXPECT_NEAR(std::exp(esag::log_density(y, p)) / ref, 1.0, 1e-9);
    }
  }
}

TEST(Density, IsotropicThreeDimensionalClosedForm) {
  // With V = I the projected normal density on S^2 depends on t = y.mu only.
  const Vector mu = vec({0.5, -1.0, 1.5});
  const EsagParams p(mu, Vector::Zero(2));
  const Vector y = vec({0.6, 0.0, 0.8});
  const double t = y.dot(mu);
  const double a = mu.squaredNorm();
  const double m2 = (1 + t * t) * esag::normal_cdf(t) + t * esag::normal_pdf(t);
  const double ref = std::exp(-0.5 * a + 0.5 * t * t) * m2 / (2 * std::numbers::pi);
  EXPECT_NEAR(std::exp(esag::log_density(y, p)), ref, 1e-14);
}

TEST(Density, IntegratesToOneOnTheSphere) {
  esag::RandomStream rng(15);
  for (int rep = 0; rep < 3; ++rep) {
    const EsagParams p(random_vec(3, 1.5, rng), random_vec(2, 0.6, rng));
    const double total =
        oracle::sphere_integral([&](const Vector& y) { return std::exp(esag::log_density(y, p)); });
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(Density, RotationEquivariance) {
  // Rotating both y and mu by Q leaves the density unchanged when gamma is
  // zero; with gamma the complement basis moves, so only the isotropic case
  // is basis free.
  esag::RandomStream rng(16);
  const Vector mu = random_vec(4, 1.0, rng);
  const Vector y = random_unit(4, rng);
  Matrix a(4, 4);
  for (int i = 0; i < 16; ++i) a(i) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
  const EsagParams p(mu, Vector::Zero(5));
  const EsagParams pr(q * mu, Vector::Zero(5));
  EXPECT_NEAR(esag::log_density(y, p), esag::log_density(q * y, pr), 1e-12);
}

TEST(Density, AntipodalSymmetryOfShape) {
  // Flipping the sign of mu maps the density at y to the density at -y.
  esag::RandomStream rng(17);
  const Vector mu = random_vec(3, 1.0, rng);
  const Vector g = random_vec(2, 0.5, rng);
  const Vector y = random_unit(3, rng);
  const double ref_pos = oracle::density(y, mu, oracle::covariance(mu, g));
  const double ref_neg = oracle::density(-y, -mu, oracle::covariance(-mu, g));
  EXPECT_NEAR(ref_pos, ref_neg, 1e-10 * ref_pos);
  EXPECT_NEAR(esag::log_density(y, EsagParams(mu, g)), std::log(ref_pos), 1e-9);
}

TEST(Sampling, DrawsAreUnitVectorsAndReproducible) {
  const EsagParams p(vec({1, -2, 0.5, 3}), vec({0.2, -0.1, 0.3, 0.0, 0.4}));
  esag::RandomStream a(99), b(99);
  const auto ya = esag::sample(p, 500, a);
  const auto yb = esag::sample(p, 500, b);
  EXPECT_EQ(ya, yb);
  for (int i = 0; i < ya.rows(); ++i) EXPECT_NEAR(ya.row(i).norm(), 1.0, 1e-14);
}

TEST(Sampling, ConcentratedDrawsCentreOnTheMean) {
  const Vector mu = vec({30.0, -20.0, 32.0});
  const EsagParams p(mu, Vector::Zero(2));
  esag::RandomStream rng(19);
  const auto ys = esag::sample(p, 100000, rng);
  const Vector mean = ys.colwise().mean().transpose();
  EXPECT_LT(std::acos(std::min(1.0, mean.normalized().dot(mu.normalized()))), 0.01);
}

TEST(Sampling, EmpiricalMomentsMatchDensity) {
  // Mean resultant and second moment against quadrature on S^2.
  const Vector mu = vec({0.8, -0.4, 1.6});
  const Vector g = vec({0.7, -0.3});
  const EsagParams p(mu, g);
  esag::RandomStream rng(18);
  const int n = 200000;
  const auto ys = esag::sample(p, n, rng);
  const Vector mean = ys.colwise().mean();
  const Matrix second = ys.transpose() * ys / n;
  for (int i = 0; i < 3; ++i) {
    const double ref = oracle::sphere_integral(
        [&](const Vector& y) { return y(i) * std::exp(esag::log_density(y, p)); }, 128);
    EXPECT_NEAR(mean(i), ref, 5.0 / std::sqrt(n));
    for (int j = i; j < 3; ++j) {
      const double ref2 = oracle::sphere_integral(
          [&](const Vector& y) { return y(i) * y(j) * std::exp(esag::log_density(y, p)); }, 128);
      EXPECT_NEAR(second(i, j), ref2, 5.0 / std::sqrt(n));
    }
  }
}

class KernelTest : public ::testing::TestWithParam<int> {};

TEST_P(KernelTest, LogDensityMatchesReference) {
  const int d = GetParam();
  esag::RandomStream rng(20 + d);
  esag::DensityKernel k(d);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector mu = random_vec(d, 1.5, rng);
    const Vector g = random_vec(esag::gamma_dim(d), 0.6, rng);
    ASSERT_TRUE(k.set(sp(mu), sp(g)));
    const EsagParams p(mu, g);
    for (int j = 0; j < 5; ++j) {
      const Vector y = random_unit(d, rng);
      EXPECT_NEAR(k.log_density(sp(y)), esag::log_density(y, p), 1e-12);
      EXPECT_NEAR(k.quad_inverse(sp(y)), y.dot(p.cov().Vinv * y), 1e-11);
    }
  }
}

TEST_P(KernelTest, GradientMatchesFiniteDifference) {
  const int d = GetParam();
  const int pdim = esag::gamma_dim(d);
  esag::RandomStream rng(40 + d);
  esag::DensityKernel k(d);
  for (int rep = 0; rep < 6; ++rep) {
    Vector mu = random_vec(d, 1.5, rng);
    if (rep == 0) mu(d - 1) = -std::abs(mu(d - 1));
    const Vector g = random_vec(pdim, 0.6, rng);
    const Vector y = random_unit(d, rng);
    Vector gm(d), gg(pdim);
    ASSERT_TRUE(k.set(sp(mu), sp(g)));
    const double f0 = k.log_density_grad(sp(y), sp(gm), sp(gg));
    EXPECT_NEAR(f0, k.log_density(sp(y)), 1e-13);
    const double h = 1e-6;
    auto value = [&](const Vector& m, const Vector& gv) {
      esag::DensityKernel kk(d);
      kk.set(sp(m), sp(gv));
      return kk.log_density(sp(y));
    };
    for (int i = 0; i < d; ++i) {
      Vector mp = mu, mm = mu;
      mp(i) += h;
      mm(i) -= h;
      EXPECT_NEAR(gm(i), (value(mp, g) - value(mm, g)) / (2 * h), 1e-6) << "mu " << i;
    }
    for (int i = 0; i < pdim; ++i) {
      Vector gp = g, gn = g;
      gp(i) += h;
      gn(i) -= h;
      EXPECT_NEAR(gg(i), (value(mu, gp) - value(mu, gn)) / (2 * h), 1e-6) << "gamma " << i;
    }
  }
}

TEST_P(KernelTest, ReusesCachedFactorsConsistently) {
  // Alternating between two parameter sets must not leak state.
  const int d = GetParam();
  esag::RandomStream rng(60 + d);
  const Vector mu1 = random_vec(d, 1.0, rng), mu2 = random_vec(d, 1.0, rng);
  const Vector g1 = random_vec(esag::gamma_dim(d), 0.5, rng);
  const Vector g2 = random_vec(esag::gamma_dim(d), 0.5, rng);
  const Vector y = random_unit(d, rng);
  esag::DensityKernel k(d);
  k.set(sp(mu1), sp(g1));
  const double a = k.log_density(sp(y));
  k.set(sp(mu2), sp(g1));
  k.set(sp(mu2), sp(g2));
  k.set(sp(mu1), sp(g2));
  k.set(sp(mu1), sp(g1));
  EXPECT_EQ(k.log_density(sp(y)), a);
}

INSTANTIATE_TEST_SUITE_P(Dims, KernelTest, ::testing::Values(3, 4, 5));

TEST(Kernel, RejectsMuBelowFloor) {
  esag::DensityKernel k(3);
  EXPECT_FALSE(k.set(sp(vec({1e-9, 0, 0})), sp(Vector::Zero(2)), 1e-6));
  EXPECT_TRUE(k.set(sp(vec({1e-3, 0, 0})), sp(Vector::Zero(2)), 1e-6));
}

}  // namespace
