#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "esag/error.hpp"
#include "esag/inference.hpp"
#include "esag/simulation.hpp"

namespace {

using esag::Dataset;
using esag::FitResult;
using esag::NullSpec;
using esag::RegressionCoefficients;
using esag::RowMatrix;
using esag::Statistic;
using esag::Vector;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Dataset small_data() {
  Dataset data;
  data.responses.resize(4, 3);
  data.responses << 1, 0, 0, 0, 1, 0, 0, 0, 1, 0.6, 0.8, 0;
  data.covariates.resize(4, 1);
  data.covariates << 1.0, 1.3, 1.7, 2.0;
  return data;
}

FitResult intercept_fit(const Vector& alpha0, const NullSpec& spec = NullSpec::isotropic()) {
  auto c = RegressionCoefficients::zeros(3, 1);
  c.alpha0 = alpha0;
  return esag::make_fit_result(c, spec, small_data());
}

TEST(Statistics, ParseAndName) {
  EXPECT_EQ(esag::parse_statistic("RoC"), Statistic::RoC);
  EXPECT_EQ(esag::parse_statistic("lr"), Statistic::LR);
  EXPECT_EQ(esag::statistic_name(Statistic::D), "D");
  EXPECT_THROW(esag::parse_statistic("t"), esag::Error);
}

TEST(Statistics, IdenticalFitsGiveOne) {
  const auto f = intercept_fit(vec({1, 2, 2}));
  EXPECT_EQ(esag::roc_statistic(f, f), 1.0);
  EXPECT_EQ(esag::d_statistic(f, f), 1.0);
}

TEST(Statistics, DoubledNormsGiveTwo) {
  const auto f0 = intercept_fit(vec({1, 2, 2}));
  const auto fa = intercept_fit(vec({2, 4, 4}), NullSpec::unrestricted());
  EXPECT_DOUBLE_EQ(esag::roc_statistic(f0, fa), 2.0);
  EXPECT_DOUBLE_EQ(esag::d_statistic(f0, fa), 2.0);
}

TEST(Statistics, DirectionalDisagreement) {
  const auto f0 = intercept_fit(vec({0, 0, 3}));
  EXPECT_DOUBLE_EQ(esag::d_statistic(f0, intercept_fit(vec({0, 0, -3}))), 3.0);
  EXPECT_DOUBLE_EQ(esag::d_statistic(f0, intercept_fit(vec({3, 0, 0}))), 2.0);
  EXPECT_DOUBLE_EQ(esag::roc_statistic(f0, intercept_fit(vec({3, 0, 0}))), 1.0);
}

TEST(Statistics, DNeverBelowRoC) {
  esag::RandomStream rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    auto c0 = RegressionCoefficients::zeros(3, 1);
    auto ca = RegressionCoefficients::zeros(3, 1);
    for (int i = 0; i < 3; ++i) {
      c0.alpha0(i) = rng.normal();
      ca.alpha0(i) = rng.normal();
      c0.A1(i, 0) = rng.normal();
      ca.A1(i, 0) = rng.normal();
    }
    const auto f0 = esag::make_fit_result(c0, NullSpec::unrestricted(), small_data());
    const auto fa = esag::make_fit_result(ca, NullSpec::unrestricted(), small_data());
    EXPECT_GE(esag::d_statistic(f0, fa), esag::roc_statistic(f0, fa) - 1e-12);
  }
}

TEST(Statistics, VanishingNullMeanIsDegenerate) {
  const auto f0 = intercept_fit(Vector::Zero(3));
  const auto fa = intercept_fit(vec({1, 0, 0}));
  EXPECT_THROW(esag::roc_statistic(f0, fa), esag::Error);
}

TEST(Statistics, MSelfOracleIsZero) {
  const Dataset data = small_data();
  const RowMatrix expected = data.responses.cwiseAbs2();
  EXPECT_EQ(esag::m_statistic(data, expected), 0.0);
}

TEST(Statistics, NullMomentsApproachUniformForSmallMean) {
  const auto data = esag::generate_dgm(esag::make_dgm("V0"), 20, 3);
  auto c = RegressionCoefficients::zeros(4, 1);
  c.alpha0 = vec({1e-4, 0, 0, 0});
  const auto f0 = esag::make_fit_result(c, NullSpec::isotropic(), data);
  esag::RandomStream rng(4);
  const RowMatrix m = esag::null_second_moments(f0, 20000, rng);
  for (int i = 0; i < m.rows(); ++i) {
    EXPECT_NEAR(m.row(i).sum(), 1.0, 1e-12);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(m(i, j), 0.25, 0.01);
  }
}

TEST(Statistics, LikelihoodRatio) {
  const auto f = intercept_fit(vec({1, 2, 2}));
  EXPECT_EQ(esag::lr_statistic(f, f), 0.0);
  auto f0 = f;
  auto fa = intercept_fit(vec({1, 2, 2}), NullSpec::unrestricted());
  fa.loglik = f0.loglik + 1.5;
  EXPECT_DOUBLE_EQ(esag::lr_statistic(f0, fa), 3.0);
  fa.loglik = f0.loglik - 0.25;
  double deficit = 0.0;
  EXPECT_EQ(esag::lr_statistic(f0, fa, &deficit), 0.0);
  EXPECT_DOUBLE_EQ(deficit, 0.5);
  EXPECT_THROW(esag::lr_statistic(fa, f0), esag::Error);
}

TEST(PValue, CountingRule) {
  const std::vector<double> v{0.1, 0.5, 0.9, 1.3};
  EXPECT_EQ(esag::bootstrap_p_value(0.5, v, false), 0.5);
  EXPECT_EQ(esag::bootstrap_p_value(2.0, v, false), 0.0);
  EXPECT_EQ(esag::bootstrap_p_value(0.0, v, false), 1.0);
  EXPECT_DOUBLE_EQ(esag::bootstrap_p_value(2.0, v, true), 0.2);
}

class BootstrapTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Dataset(esag::generate_dgm(esag::make_dgm("V0"), 80, 17));
  }
  static void TearDownTestSuite() { delete data_; }
  static esag::BootstrapConfig config(int workers) {
    esag::BootstrapConfig c;
    c.B = 6;
    c.seed = 42;
    c.mc_size = 500;
    c.workers = workers;
    return c;
  }
  static Dataset* data_;
};
Dataset* BootstrapTest::data_ = nullptr;

TEST_F(BootstrapTest, IndependentOfWorkerCount) {
  const Statistic stats[] = {Statistic::RoC, Statistic::M, Statistic::LR};
  const auto a = esag::bootstrap_test(*data_, NullSpec::isotropic(), NullSpec::unrestricted(),
                                      stats, config(1));
  const auto b = esag::bootstrap_test(*data_, NullSpec::isotropic(), NullSpec::unrestricted(),
                                      stats, config(4));
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].observed_value, b[k].observed_value);
    EXPECT_EQ(a[k].bootstrap_values, b[k].bootstrap_values);
    EXPECT_EQ(a[k].p_value, b[k].p_value);
    EXPECT_EQ(a[k].excluded, b[k].excluded);
  }
}

TEST_F(BootstrapTest, SingleStatisticMatchesJointRun) {
  const Statistic stats[] = {Statistic::RoC, Statistic::LR};
  const auto joint = esag::bootstrap_test(*data_, NullSpec::isotropic(), NullSpec::unrestricted(),
                                          stats, config(1));
  const auto alone = esag::bootstrap_test(*data_, NullSpec::isotropic(), NullSpec::unrestricted(),
                                          Statistic::LR, config(1));
  EXPECT_EQ(alone.bootstrap_values, joint[1].bootstrap_values);
  EXPECT_EQ(alone.p_value, joint[1].p_value);
}

TEST_F(BootstrapTest, ReportIsConsistent) {
  const auto r = esag::bootstrap_test(*data_, NullSpec::isotropic(), NullSpec::unrestricted(),
                                      Statistic::RoC, config(1));
  EXPECT_EQ(r.statistic_name, "RoC");
  EXPECT_EQ(r.B, 6);
  EXPECT_EQ(r.bootstrap_values.size() + r.excluded.size(), 6u);
  EXPECT_EQ(r.p_value, esag::bootstrap_p_value(r.observed_value, r.bootstrap_values, false));
  EXPECT_GE(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
  EXPECT_GT(r.observed_value, 0.0);
}

TEST_F(BootstrapTest, RejectsNonNestedSpecs) {
  EXPECT_THROW(esag::bootstrap_test(*data_, NullSpec::unrestricted(), NullSpec::isotropic(),
                                    Statistic::RoC, config(1)),
               esag::Error);
}

TEST(Gof, PerfectPredictionGivesZero) {
  const auto f = intercept_fit(vec({1, 2, 2}));
  Dataset data = small_data();
  for (int i = 0; i < data.n(); ++i) data.responses.row(i) = vec({1, 2, 2}).normalized().transpose();
  const Vector t = esag::gof_T(f, data);
  EXPECT_LT(t.cwiseAbs().maxCoeff(), 1e-28);
}

TEST(Gof, CorrectModelMeanNearDegreesOfFreedom) {
  const auto dgm = esag::make_dgm("gamma1", 1.0);
  const auto data = esag::generate_dgm(dgm, 2000, 31);
  const auto f = esag::make_fit_result(dgm.coefficients, NullSpec::unrestricted(), data);
  const Vector t = esag::gof_T(f, data);
  EXPECT_NEAR(t.mean(), 3.0, 0.3);
}

TEST(Gof, KsDistance) {
  // Exact chi^2_2 quantiles at (i - 1/2) / n give distance 1 / (2n).
  const int n = 10;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = -2.0 * std::log(1.0 - (i + 0.5) / n);
  EXPECT_NEAR(esag::ks_distance_chisq(v, 2), 0.05, 1e-12);
}

}  // namespace
