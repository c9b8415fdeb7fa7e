#include "esag/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "esag/error.hpp"

namespace esag {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits one CSV record. Double-quoted fields may contain commas; "" is an
// escaped quote.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_number(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  value = std::strtod(begin, &end);
  return end != begin && *end == '\0' && errno != ERANGE && std::isfinite(value);
}

Error row_error(int row, const std::string& what) {
  return Error(ErrorKind::Ingestion, "row " + std::to_string(row) + ": " + what);
}

std::vector<int> locate(const std::vector<std::string>& header,
                        const std::vector<std::string>& wanted) {
  std::vector<int> idx;
  for (const auto& name : wanted) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::Ingestion, "no column named '" + name + "'");
    idx.push_back(static_cast<int>(it - header.begin()));
  }
  return idx;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from(const Json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Matrix matrix_from(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw Error(ErrorKind::Io, "matrix has the wrong number of rows");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorKind::Io, "matrix has the wrong number of columns");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Json summary_json(const FitSummary& s) {
  return Json{{"spec", s.spec},
              {"loglik", s.loglik},
              {"converged", s.converged},
              {"iterations", s.iterations},
              {"free_parameters", s.free_parameters}};
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  for (auto& s : split_record(text)) out.push_back(s);
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) {
    double v = 0.0;
    if (!parse_number(s, v)) throw Error(ErrorKind::Misuse, "not a number: '" + s + "'");
    out.push_back(v);
  }
  return out;
}

Dataset read_dataset(std::istream& in, const IngestConfig& config) {
  if (config.responses.empty()) throw Error(ErrorKind::Misuse, "no response columns given");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Ingestion, "input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_record(line);
  const std::vector<int> ycols = locate(header, config.responses);
  const std::vector<int> xcols = locate(header, config.covariates);
  const auto d = static_cast<Eigen::Index>(ycols.size());
  const auto q = static_cast<Eigen::Index>(xcols.size());

  std::vector<double> ybuf, xbuf;
  int row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_record(line);
    if (fields.size() != header.size())
      throw row_error(row, "expected " + std::to_string(header.size()) + " fields, found " +
                               std::to_string(fields.size()));
    Vector y(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string& f = fields[ycols[j]];
      if (!parse_number(f, y(j)))
        throw row_error(row, "missing or non-numeric value in column '" + header[ycols[j]] + "'");
    }
    if (config.compositional) {
      if (y.minCoeff() < -config.tolerance) throw row_error(row, "composition has a negative part");
      const double total = y.sum();
      if (std::abs(total - 1.0) > config.tolerance)
        throw row_error(row, "composition sums to " + std::to_string(total) + ", not 1");
      y = y.cwiseMax(0.0) / total;
      y = y.cwiseSqrt();
    } else {
      const double norm = y.norm();
      if (std::abs(norm - 1.0) > config.tolerance)
        throw row_error(row, "response has norm " + std::to_string(norm) + ", not 1");
      y /= norm;
    }
    ybuf.insert(ybuf.end(), y.data(), y.data() + d);
    for (Eigen::Index k = 0; k < q; ++k) {
      double v = 0.0;
      if (!parse_number(fields[xcols[k]], v))
        throw row_error(row, "missing or non-numeric value in column '" + header[xcols[k]] + "'");
      xbuf.push_back(v);
    }
  }
  if (row == 0) throw Error(ErrorKind::Ingestion, "input has no data rows");

  Dataset data;
  data.responses = Eigen::Map<RowMatrix>(ybuf.data(), row, d);
  if (q > 0) {
    const RowMatrix raw = Eigen::Map<RowMatrix>(xbuf.data(), row, q);
    auto [x, rec] = standardize_covariates(raw, config.covariates);
    data.covariates = std::move(x);
    data.record = std::move(rec);
  } else {
    data.covariates.resize(row, 0);
  }
  return data;
}

Dataset read_dataset_file(const std::string& path, const IngestConfig& config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return read_dataset(in, config);
}

Json coefficients_json(const RegressionCoefficients& c) {
  return Json{{"d", c.d()},
              {"q", c.q()},
              {"alpha0", vector_json(c.alpha0)},
              {"A1", matrix_json(c.A1)},
              {"beta0", vector_json(c.beta0)},
              {"B1", matrix_json(c.B1)}};
}

RegressionCoefficients coefficients_from_json(const Json& j) {
  const int d = j.at("d").get<int>();
  const int q = j.at("q").get<int>();
  RegressionCoefficients c = RegressionCoefficients::zeros(d, q);
  c.alpha0 = vector_from(j.at("alpha0"));
  c.beta0 = vector_from(j.at("beta0"));
  if (c.alpha0.size() != d || c.beta0.size() != gamma_dim(d))
    throw Error(ErrorKind::Io, "coefficient vectors have the wrong length");
  c.A1 = matrix_from(j.at("A1"), d, q);
  c.B1 = matrix_from(j.at("B1"), gamma_dim(d), q);
  return c;
}

Json record_json(const std::optional<StandardizationRecord>& record) {
  if (!record) return nullptr;
  return Json{{"min", record->min}, {"range", record->range}};
}

std::optional<StandardizationRecord> record_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  StandardizationRecord r;
  r.min = j.at("min").get<std::vector<double>>();
  r.range = j.at("range").get<std::vector<double>>();
  if (r.min.size() != r.range.size()) throw Error(ErrorKind::Io, "malformed standardization record");
  return r;
}

Json model_json(const FitResult& fit, const std::optional<StandardizationRecord>& record) {
  return Json{{"spec", fit.spec.describe()},
              {"coefficients", coefficients_json(fit.coefficients)},
              {"standardization", record_json(record)}};
}

SavedModel model_from_json(const Json& j) {
  SavedModel m;
  m.coefficients = coefficients_from_json(j.at("coefficients"));
  m.spec = parse_null_spec(j.at("spec").get<std::string>());
  m.record = record_from_json(j.at("standardization"));
  return m;
}

Json fit_json(const FitResult& fit, const Dataset& data) {
  Json j = summary_json(summarize(fit, data.d(), data.q()));
  j["evaluations"] = fit.evaluations;
  j["underdetermined"] = fit.underdetermined;
  j["model"] = model_json(fit, data.record);
  return j;
}

Json test_report_json(const TestReport& r) {
  Json j;
  j["statistic"] = r.statistic_name;
  j["observed"] = r.observed_value;
  j["p_value"] = r.p_value;
  j["B"] = r.B;
  j["B_used"] = static_cast<int>(r.bootstrap_values.size());
  j["plus_one"] = r.plus_one;
  j["mc_size"] = r.mc_size;
  j["seed"] = r.seed;
  j["excluded"] = r.excluded;
  j["bootstrap_values"] = r.bootstrap_values;
  j["null_fit"] = summary_json(r.null_fit);
  j["alt_fit"] = summary_json(r.alt_fit);
  j["warnings"] = r.warnings;
  return j;
}

Json gof_report_json(const GofReport& r, int bins, int dof) {
  Json j;
  j["fit"] = summary_json(r.fit);
  j["mean_T"] = r.mean_T;
  j["ks"] = r.ks;
  j["p_value"] = r.B > 0 ? Json(r.p_value) : Json(nullptr);
  j["B"] = r.B;
  j["B_used"] = static_cast<int>(r.bootstrap_values.size());
  j["seed"] = r.seed;
  j["excluded"] = r.excluded;
  j["bootstrap_values"] = r.bootstrap_values;
  j["T"] = vector_json(r.T);
  if (r.T.size() > 0) {
    const Histogram h = histogram_chisq(r.T, bins, dof);
    j["histogram"] = Json{{"dof", dof},
                          {"edges", h.edges},
                          {"counts", h.counts},
                          {"density", h.density},
                          {"chisq_density", h.chisq_density}};
  }
  j["warnings"] = r.warnings;
  return j;
}

Json region_json(const PredictionRegion& r) {
  return Json{{"level", r.level},
              {"center", vector_json(r.center)},
              {"Vinv", matrix_json(r.Vinv)},
              {"threshold", r.threshold},
              {"m", r.m},
              {"B", r.B},
              {"replicates_used", r.replicates_used},
              {"seed", r.seed},
              {"extrapolated", r.extrapolated},
              {"warnings", r.warnings}};
}

Json rejection_cells_json(const std::vector<RejectionCell>& cells) {
  Json a = Json::array();
  for (const auto& c : cells)
    a.push_back(Json{{"dgm", c.dgm},
                     {"r", c.r},
                     {"n", c.n},
                     {"statistic", c.statistic},
                     {"level", c.level},
                     {"rate", c.rate},
                     {"se", c.se},
                     {"reps", c.reps},
                     {"B", c.B},
                     {"seed", c.seed},
                     {"unreliable_reps", c.unreliable_reps}});
  return a;
}

Json coverage_cells_json(const std::vector<CoverageCell>& cells) {
  Json a = Json::array();
  for (const auto& c : cells)
    a.push_back(Json{{"n", c.n},
                     {"level", c.level},
                     {"mean", c.mean},
                     {"sd", c.sd},
                     {"se", c.se},
                     {"reps", c.reps},
                     {"m", c.m},
                     {"B", c.B},
                     {"seed", c.seed}});
  return a;
}

Json profile_json(const ProfileResult& p) {
  return Json{{"c_grid", p.c_grid},
              {"loglik", p.loglik},
              {"c_star", p.c_star},
              {"c_a", p.c_a},
              {"roc_star", p.roc_star}};
}

Histogram histogram_chisq(const Vector& values, int bins, int dof) {
  if (bins < 1) throw Error(ErrorKind::Contract, "bins must be positive");
  if (values.size() == 0) throw Error(ErrorKind::Contract, "no values to bin");
  Histogram h;
  const double hi = std::max(values.maxCoeff(), std::numeric_limits<double>::min());
  const double width = hi / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : b * width);
  h.counts.assign(bins, 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int b = static_cast<int>(values(i) / width);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  }
  const boost::math::chi_squared chi(dof);
  const double n = static_cast<double>(values.size());
  for (int b = 0; b < bins; ++b) {
    h.density.push_back(h.counts[b] / (n * width));
    const double mid = (b + 0.5) * width;
    h.chisq_density.push_back(boost::math::pdf(chi, mid));
  }
  return h;
}

std::string dump_report(const Json& report) { return report.dump(2) + "\n"; }

}  // namespace esag
