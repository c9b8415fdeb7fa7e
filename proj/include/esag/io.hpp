#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "esag/inference.hpp"
#include "esag/prediction.hpp"
#include "esag/regression.hpp"
#include "esag/simulation.hpp"

namespace esag {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

struct IngestConfig {
  std::vector<std::string> responses;   // response column names, in order
  std::vector<std::string> covariates;  // may be empty
  /// Rows are compositions: nonnegative, summing to one. They are mapped to
  /// the sphere by an elementwise square root.
  bool compositional = false;
  double tolerance = 1e-6;
};

/// Header row, comma separated, '.' decimal. Throws Ingestion errors that
/// name the offending data row (1-based, header excluded).
Dataset read_dataset(std::istream& in, const IngestConfig& config);
Dataset read_dataset_file(const std::string& path, const IngestConfig& config);

/// Splits "a,b,c" into names; empty input gives an empty list.
std::vector<std::string> split_list(const std::string& text);
std::vector<double> parse_doubles(const std::string& text);

Json coefficients_json(const RegressionCoefficients& c);
RegressionCoefficients coefficients_from_json(const Json& j);

Json record_json(const std::optional<StandardizationRecord>& record);
std::optional<StandardizationRecord> record_from_json(const Json& j);

/// Everything needed to evaluate the fitted conditional density again.
struct SavedModel {
  RegressionCoefficients coefficients;
  NullSpec spec;
  std::optional<StandardizationRecord> record;
};

Json model_json(const FitResult& fit, const std::optional<StandardizationRecord>& record);
SavedModel model_from_json(const Json& j);

Json fit_json(const FitResult& fit, const Dataset& data);
Json test_report_json(const TestReport& report);
/// Includes histogram bins of T with the chi^2_dof reference density.
Json gof_report_json(const GofReport& report, int bins, int dof);
Json region_json(const PredictionRegion& region);
Json rejection_cells_json(const std::vector<RejectionCell>& cells);
Json coverage_cells_json(const std::vector<CoverageCell>& cells);
Json profile_json(const ProfileResult& profile);

struct Histogram {
  std::vector<double> edges;    // bins + 1 ascending edges
  std::vector<int> counts;
  std::vector<double> density;  // counts / (n * width)
  std::vector<double> chisq_density;  // chi^2_dof density at bin midpoints
};

/// Equal-width bins on [0, max] with the chi^2 reference density.
Histogram histogram_chisq(const Vector& values, int bins, int dof);

/// Two-space indented JSON with a trailing newline.
std::string dump_report(const Json& report);

}  // namespace esag
