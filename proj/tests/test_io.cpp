#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "esag/error.hpp"
#include "esag/io.hpp"

namespace {

using esag::IngestConfig;
using esag::Vector;

esag::ErrorKind ingest_error(const std::string& csv, const IngestConfig& cfg, std::string* what) {
  std::istringstream in(csv);
  try {
    esag::read_dataset(in, cfg);
  } catch (const esag::Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error for:\n" << csv;
  return esag::ErrorKind::Contract;
}

IngestConfig composition_config() {
  IngestConfig cfg;
  cfg.responses = {"a", "b", "c", "d"};
  cfg.covariates = {"site"};
  cfg.compositional = true;
  return cfg;
}

TEST(Ingest, CompositionIsSquareRooted) {
  std::istringstream in("a,b,c,d,site\n0.25,0.25,0.25,0.25,0\n0.1,0.2,0.3,0.4,1\n");
  const auto data = esag::read_dataset(in, composition_config());
  ASSERT_EQ(data.n(), 2);
  ASSERT_EQ(data.d(), 4);
  for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(data.responses(0, j), 0.5);
  EXPECT_NEAR(data.responses.row(1).norm(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(data.responses(1, 3), std::sqrt(0.4));
  EXPECT_EQ(data.covariates(0, 0), 1.0);
  EXPECT_EQ(data.covariates(1, 0), 2.0);
  ASSERT_TRUE(data.record.has_value());
  EXPECT_EQ(data.record->min[0], 0.0);
}

TEST(Ingest, CompositionOffTheSimplexNamesTheRow) {
  std::string what;
  const auto kind = ingest_error("a,b,c,d,site\n0.25,0.25,0.25,0.25,0\n0.5,0.5,0.25,0.25,1\n",
                                 composition_config(), &what);
  EXPECT_EQ(kind, esag::ErrorKind::Ingestion);
  EXPECT_NE(what.find("row 2"), std::string::npos) << what;
  EXPECT_NE(what.find("1.5"), std::string::npos) << what;
}

TEST(Ingest, NegativeCompositionPart) {
  std::string what;
  ingest_error("a,b,c,d,site\n-0.1,0.5,0.3,0.3,0\n0.25,0.25,0.25,0.25,1\n", composition_config(),
               &what);
  EXPECT_NE(what.find("row 1"), std::string::npos) << what;
}

TEST(Ingest, UnitVectorsAreRenormalisedWithinTolerance) {
  IngestConfig cfg;
  cfg.responses = {"y1", "y2", "y3"};
  std::istringstream in("x,y1,y2,y3\n5,0.6,0.8,0.0000001\n7,0,0,1\n");
  cfg.covariates = {"x"};
  const auto data = esag::read_dataset(in, cfg);
  EXPECT_NEAR(data.responses.row(0).norm(), 1.0, 1e-15);
  EXPECT_EQ(data.covariates(0, 0), 1.0);
  EXPECT_EQ(data.covariates(1, 0), 2.0);
}

TEST(Ingest, NonUnitRowIsRejected) {
  IngestConfig cfg;
  cfg.responses = {"y1", "y2", "y3"};
  std::string what;
  EXPECT_EQ(ingest_error("y1,y2,y3\n0,0,1\n0,1,0\n0.5,0.5,0.5\n", cfg, &what),
            esag::ErrorKind::Ingestion);
  EXPECT_NE(what.find("row 3"), std::string::npos) << what;
}

TEST(Ingest, MissingValueAndMissingColumn) {
  IngestConfig cfg;
  cfg.responses = {"y1", "y2", "y3"};
  std::string what;
  EXPECT_EQ(ingest_error("y1,y2,y3\n0,0,1\n0,,1\n", cfg, &what), esag::ErrorKind::Ingestion);
  EXPECT_NE(what.find("row 2"), std::string::npos) << what;
  cfg.responses = {"y1", "y2", "z"};
  EXPECT_EQ(ingest_error("y1,y2,y3\n0,0,1\n", cfg, &what), esag::ErrorKind::Ingestion);
  EXPECT_NE(what.find("'z'"), std::string::npos) << what;
}

TEST(Ingest, ConstantCovariateIsZeroRange) {
  IngestConfig cfg;
  cfg.responses = {"y1", "y2", "y3"};
  cfg.covariates = {"x"};
  EXPECT_EQ(ingest_error("y1,y2,y3,x\n0,0,1,3\n1,0,0,3\n", cfg, nullptr),
            esag::ErrorKind::ZeroRange);
}

TEST(Ingest, QuotedFieldsAndByteOrderMark) {
  IngestConfig cfg;
  cfg.responses = {"y 1", "y2", "y3"};
  std::istringstream in("\xEF\xBB\xBF\"y 1\",\"y2\",y3\n\"1\",0,0\n0,0,1\n");
  const auto data = esag::read_dataset(in, cfg);
  EXPECT_EQ(data.responses(0, 0), 1.0);
  EXPECT_EQ(data.q(), 0);
}

TEST(Lists, SplitAndParse) {
  EXPECT_EQ(esag::split_list("a,b,c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(esag::split_list("").empty());
  EXPECT_EQ(esag::parse_doubles("0.9,0.95"), (std::vector<double>{0.9, 0.95}));
  EXPECT_THROW(esag::parse_doubles("0.9,x"), esag::Error);
}

TEST(Model, JsonRoundTripPreservesTheDensity) {
  auto c = esag::RegressionCoefficients::zeros(3, 1);
  c.alpha0 << 0.5, -0.2, 1.0;
  c.A1.col(0) << 0.3, 0.4, -0.1;
  c.beta0 << 0.2, -0.3;
  c.B1.col(0) << 0.1, 0.25;
  esag::Dataset data;
  data.responses.resize(2, 3);
  data.responses << 1, 0, 0, 0, 0.6, 0.8;
  data.covariates.resize(2, 1);
  data.covariates << 1.0, 2.0;
  data.record = esag::StandardizationRecord{{-3.0}, {7.0}};
  const auto fit = esag::make_fit_result(c, esag::NullSpec::shape_intercept_only(), data);
  const std::string text = esag::dump_report(esag::model_json(fit, data.record));
  const auto model = esag::model_from_json(esag::Json::parse(text));
  EXPECT_EQ(model.spec.describe(), fit.spec.describe());
  ASSERT_TRUE(model.record.has_value());
  EXPECT_EQ(model.record->min, data.record->min);
  const Vector x = (Vector(1) << 0.5).finished();
  const Vector y = (Vector(3) << 0.0, 0.6, 0.8).finished();
  const auto before = esag::predict_params(c, x, data.record);
  const auto after = esag::predict_params(model.coefficients, x, model.record);
  EXPECT_NEAR(esag::log_density(y, before.params), esag::log_density(y, after.params), 1e-12);
}

TEST(Reports, TrailingNewlineAndSchemaStableKeys) {
  esag::Json j;
  j["b"] = 1;
  j["a"] = 2;
  const std::string s = esag::dump_report(j);
  EXPECT_EQ(s.back(), '\n');
  EXPECT_LT(s.find("\"b\""), s.find("\"a\""));
}

TEST(Reports, HistogramAgainstChiSquare) {
  Vector t(6);
  t << 0.1, 0.5, 1.0, 2.0, 3.5, 4.0;
  const auto h = esag::histogram_chisq(t, 4, 3);
  ASSERT_EQ(h.edges.size(), 5u);
  EXPECT_EQ(h.edges.front(), 0.0);
  EXPECT_EQ(h.edges.back(), 4.0);
  EXPECT_EQ(h.counts, (std::vector<int>{2, 1, 1, 2}));
  double mass = 0.0;
  for (std::size_t k = 0; k < h.density.size(); ++k) mass += h.density[k] * 1.0;
  EXPECT_NEAR(mass, 1.0, 1e-15);
  // chi^2_3 density at 0.5.
  EXPECT_NEAR(h.chisq_density[0], std::sqrt(0.5) * std::exp(-0.25) / std::sqrt(2 * M_PI), 1e-14);
}

}  // namespace
