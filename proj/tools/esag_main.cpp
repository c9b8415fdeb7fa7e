// Command-line front end: fit, test, predict, gof, simulate, profile.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esag/error.hpp"
#include "esag/io.hpp"

namespace {

using namespace esag;

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIngestion = 3;
constexpr int kExitConvergence = 4;
constexpr int kExitIo = 5;
constexpr int kExitContract = 6;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Misuse:
      return kExitUsage;
    case ErrorKind::Ingestion:
    case ErrorKind::ZeroRange:
    case ErrorKind::DegenerateData:
    case ErrorKind::DimensionTooSmall:
      return kExitIngestion;
    case ErrorKind::DegenerateFit:
      return kExitConvergence;
    case ErrorKind::Io:
      return kExitIo;
    case ErrorKind::DegenerateMean:
    case ErrorKind::Contract:
      return kExitContract;
  }
  return kExitInternal;
}

struct Options {
  std::string command;
  std::string input;
  std::string responses;
  std::string covariates;
  bool compositional = false;
  std::string null_spec;
  std::string statistic;
  int B = -1;
  int m = 2000;
  std::string levels;
  int mc_size = 10000;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out;

  bool plus_one = false;
  std::vector<std::string> x0;
  std::string quantile = "order";
  std::string optimizer = "bfgs";
  int restarts = 5;
  double tol = 1e-8;
  int bins = 30;

  std::string study = "rejection";
  std::string dgm = "V0";
  double r = 0.0;
  int n = 200;
  int reps = 200;
  std::string mu;
  std::string gamma;
  double angle = 0.0;
  std::string grid;
};

OptimizerConfig optimizer_config(const Options& o) {
  OptimizerConfig c;
  if (o.optimizer == "bfgs")
    c.method = OptimizerMethod::Bfgs;
  else if (o.optimizer == "nelder-mead")
    c.method = OptimizerMethod::NelderMead;
  else
    throw Error(ErrorKind::Misuse, "unknown optimizer '" + o.optimizer + "'");
  c.restarts = o.restarts;
  c.rel_tol = o.tol;
  return c;
}

Json optimizer_echo(const Options& o) {
  return Json{{"method", o.optimizer}, {"restarts", o.restarts}, {"rel_tol", o.tol}};
}

std::uint64_t require_seed(const Options& o) {
  if (!o.seed) throw Error(ErrorKind::Misuse, "--seed is required for the " + o.command + " command");
  return *o.seed;
}

std::vector<double> levels_or(const Options& o, std::vector<double> fallback) {
  if (o.levels.empty()) return fallback;
  return parse_doubles(o.levels);
}

Dataset load(const Options& o) {
  if (o.input.empty()) throw Error(ErrorKind::Misuse, "--input is required");
  IngestConfig ic;
  ic.responses = split_list(o.responses);
  ic.covariates = split_list(o.covariates);
  ic.compositional = o.compositional;
  return read_dataset_file(o.input, ic);
}

Json input_echo(const Options& o) {
  return Json{{"input", o.input},
              {"responses", split_list(o.responses)},
              {"covariates", split_list(o.covariates)},
              {"compositional", o.compositional}};
}

Json data_echo(const Dataset& data) {
  return Json{{"n", data.n()},
              {"d", data.d()},
              {"q", data.q()},
              {"standardization", record_json(data.record)}};
}

Json header(const Options& o) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["command"] = o.command;
  return j;
}

struct Outcome {
  Json report;
  bool converged = true;
};

Outcome cmd_fit(const Options& o) {
  const Dataset data = load(o);
  const NullSpec spec = parse_null_spec(o.null_spec.empty() ? "full" : o.null_spec);
  RandomStream rng = derive_stream(o.seed.value_or(0), {0, kTagNullFit});
  const FitResult f = fit(data, spec, optimizer_config(o), rng);
  Outcome out{header(o), f.converged};
  out.report["config"] = input_echo(o);
  out.report["config"]["null"] = spec.describe();
  out.report["config"]["seed"] = o.seed.value_or(0);
  out.report["config"]["optimizer"] = optimizer_echo(o);
  out.report["data"] = data_echo(data);
  out.report["fit"] = fit_json(f, data);
  return out;
}

Outcome cmd_test(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  if (o.null_spec.empty()) throw Error(ErrorKind::Misuse, "--null is required for test");
  const Dataset data = load(o);
  const NullSpec null = parse_null_spec(o.null_spec);
  std::vector<Statistic> stats;
  for (const auto& s : split_list(o.statistic.empty() ? "roc" : o.statistic))
    stats.push_back(parse_statistic(s));
  BootstrapConfig bc;
  bc.B = o.B < 0 ? 300 : o.B;
  bc.seed = seed;
  bc.mc_size = o.mc_size;
  bc.workers = o.workers;
  bc.plus_one = o.plus_one;
  bc.optimizer = optimizer_config(o);
  const auto reports = bootstrap_test(data, null, NullSpec::unrestricted(), stats, bc);

  Outcome out{header(o)};
  Json cfg = input_echo(o);
  cfg["null"] = null.describe();
  cfg["alternative"] = NullSpec::unrestricted().describe();
  Json names = Json::array();
  for (Statistic s : stats) names.push_back(statistic_name(s));
  cfg["statistics"] = names;
  cfg["B"] = bc.B;
  cfg["mc_size"] = bc.mc_size;
  cfg["plus_one"] = bc.plus_one;
  cfg["seed"] = seed;
  cfg["optimizer"] = optimizer_echo(o);
  out.report["config"] = cfg;
  out.report["data"] = data_echo(data);
  Json tests = Json::array();
  for (const auto& r : reports) {
    tests.push_back(test_report_json(r));
    out.converged = out.converged && r.null_fit.converged && r.alt_fit.converged;
  }
  out.report["tests"] = tests;
  return out;
}

QuantileRule quantile_rule(const std::string& s) {
  if (s == "order") return QuantileRule::OrderStatistic;
  if (s == "interpolated") return QuantileRule::Interpolated;
  throw Error(ErrorKind::Misuse, "unknown quantile rule '" + s + "'");
}

Outcome cmd_predict(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  const Dataset data = load(o);
  RegionConfig rc;
  rc.m = o.m;
  rc.B = o.B < 0 ? 0 : o.B;
  rc.seed = seed;
  rc.workers = o.workers;
  rc.rule = quantile_rule(o.quantile);
  rc.optimizer = optimizer_config(o);
  const std::vector<double> levels = levels_or(o, {0.90, 0.95, 0.99});

  std::vector<std::vector<double>> points;
  for (const auto& s : o.x0) points.push_back(parse_doubles(s));
  if (points.empty()) {
    if (data.q() > 0) throw Error(ErrorKind::Misuse, "--x0 is required when covariates are used");
    points.emplace_back();
  }

  Outcome out{header(o)};
  Json cfg = input_echo(o);
  cfg["levels"] = levels;
  cfg["m"] = rc.m;
  cfg["B"] = rc.B;
  cfg["quantile"] = o.quantile;
  cfg["x0"] = points;
  cfg["seed"] = seed;
  cfg["optimizer"] = optimizer_echo(o);
  out.report["config"] = cfg;
  out.report["data"] = data_echo(data);
  Json preds = Json::array();
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != data.q())
      throw Error(ErrorKind::Misuse, "x0 needs " + std::to_string(data.q()) + " values");
    const Vector x = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
    const auto regions = prediction_regions(data, x, levels, rc);
    Json rs = Json::array();
    for (const auto& r : regions) {
      rs.push_back(region_json(r));
      out.converged = out.converged &&
                      std::find(r.warnings.begin(), r.warnings.end(), "fit did not converge") ==
                          r.warnings.end();
    }
    preds.push_back(Json{{"x0", p}, {"regions", rs}});
  }
  out.report["predictions"] = preds;
  return out;
}

Outcome cmd_gof(const Options& o) {
  const Dataset data = load(o);
  const NullSpec spec = parse_null_spec(o.null_spec.empty() ? "full" : o.null_spec);
  BootstrapConfig bc;
  bc.B = o.B < 0 ? 0 : o.B;
  if (bc.B > 0) bc.seed = require_seed(o);
  bc.workers = o.workers;
  bc.plus_one = o.plus_one;
  bc.optimizer = optimizer_config(o);
  const GofReport g = gof_test(data, spec, bc);
  Outcome out{header(o), g.fit.converged};
  Json cfg = input_echo(o);
  cfg["null"] = spec.describe();
  cfg["B"] = bc.B;
  cfg["bins"] = o.bins;
  cfg["seed"] = bc.seed;
  cfg["optimizer"] = optimizer_echo(o);
  out.report["config"] = cfg;
  out.report["data"] = data_echo(data);
  out.report["gof"] = gof_report_json(g, o.bins, data.d() - 1);
  return out;
}

Outcome cmd_simulate(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  Outcome out{header(o)};
  if (o.study == "rejection") {
    const DgmSpec dgm = make_dgm(o.dgm, o.r);
    const NullSpec null = o.null_spec.empty() ? null_spec_for(dgm.family) : parse_null_spec(o.null_spec);
    std::vector<Statistic> stats;
    if (o.statistic.empty())
      stats = statistics_for(dgm.family);
    else
      for (const auto& s : split_list(o.statistic)) stats.push_back(parse_statistic(s));
    StudyConfig sc;
    sc.n = o.n;
    sc.B = o.B < 0 ? 300 : o.B;
    sc.reps = o.reps;
    sc.levels = levels_or(o, {0.01, 0.05, 0.10});
    sc.seed = seed;
    sc.mc_size = o.mc_size;
    sc.workers = o.workers;
    sc.optimizer = optimizer_config(o);
    const auto cells = run_rejection_study(null, stats, dgm, sc);
    Json names = Json::array();
    for (Statistic s : stats) names.push_back(statistic_name(s));
    out.report["config"] = Json{{"study", o.study}, {"dgm", o.dgm},     {"r", o.r},
                                {"null", null.describe()},
                                {"statistics", names},  {"n", sc.n},        {"B", sc.B},
                                {"reps", sc.reps},      {"levels", sc.levels},
                                {"mc_size", sc.mc_size}, {"seed", seed},
                                {"optimizer", optimizer_echo(o)}};
    out.report["cells"] = rejection_cells_json(cells);
  } else if (o.study == "coverage") {
    const std::vector<double> mu = parse_doubles(o.mu.empty() ? "1,2,3" : o.mu);
    const Vector mu_v = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    const int d = static_cast<int>(mu.size());
    const std::vector<double> gamma =
        o.gamma.empty() ? std::vector<double>(gamma_dim(d), 0.0) : parse_doubles(o.gamma);
    const Vector gamma_v =
        Eigen::Map<const Vector>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
    CoverageConfig cc;
    cc.n = o.n;
    cc.m = o.m;
    cc.B = o.B < 0 ? 0 : o.B;
    cc.reps = o.reps;
    cc.levels = levels_or(o, {0.90, 0.95, 0.99});
    cc.seed = seed;
    cc.workers = o.workers;
    cc.optimizer = optimizer_config(o);
    const auto cells = run_coverage_study(EsagParams(mu_v, gamma_v), cc);
    out.report["config"] = Json{{"study", o.study}, {"mu", mu},   {"gamma", gamma},
                                {"n", cc.n},        {"m", cc.m},  {"B", cc.B},
                                {"reps", cc.reps},  {"levels", cc.levels},
                                {"seed", seed},     {"optimizer", optimizer_echo(o)}};
    out.report["cells"] = coverage_cells_json(cells);
  } else {
    throw Error(ErrorKind::Misuse, "unknown study '" + o.study + "'");
  }
  return out;
}

Outcome cmd_profile(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  const std::vector<double> mu = parse_doubles(o.mu.empty() ? "0,0,5" : o.mu);
  const int d = static_cast<int>(mu.size());
  const Vector mu_a = Eigen::Map<const Vector>(mu.data(), d);
  const std::vector<double> gamma =
      o.gamma.empty() ? std::vector<double>(gamma_dim(d), 0.0) : parse_doubles(o.gamma);
  const Vector gamma_v = Eigen::Map<const Vector>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
  const double c_a = mu_a.norm();
  std::vector<double> g = parse_doubles(o.grid.empty() ? "0.5,2,301" : o.grid);
  if (g.size() != 3 || g[2] < 2 || !(g[0] > 0.0) || !(g[1] > g[0]))
    throw Error(ErrorKind::Misuse, "--grid takes lo,hi,count as multiples of |mu| with 0 < lo < hi");
  const int count = static_cast<int>(g[2]);
  std::vector<double> grid;
  for (int k = 0; k < count; ++k) grid.push_back(c_a * (g[0] + (g[1] - g[0]) * k / (count - 1)));

  RandomStream rng = derive_stream(seed, {0, kTagData});
  const RowMatrix sample_y = sample(EsagParams(mu_a, gamma_v), o.n, rng);
  const Matrix rot = plane_rotation(d, 1, 2, o.angle * std::numbers::pi / 180.0);
  const ProfileResult p = concentration_profile(sample_y, mu_a, rot, grid, c_a);

  Outcome out{header(o)};
  out.report["config"] = Json{{"mu", mu},      {"gamma", gamma}, {"angle_degrees", o.angle},
                              {"n", o.n},      {"grid", g},      {"seed", seed}};
  out.report["profile"] = profile_json(p);
  return out;
}

void write(const Options& o, const Json& report) {
  const std::string text = dump_report(report);
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + o.out + "'");
  f << text;
  if (!f) throw Error(ErrorKind::Io, "write to '" + o.out + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directional regression with the elliptically symmetric angular Gaussian"};
  Options o;
  app.add_option("--command", o.command, "fit, test, predict, gof, simulate or profile")
      ->required()
      ->check(CLI::IsMember({"fit", "test", "predict", "gof", "simulate", "profile"}));
  app.add_option("--input", o.input, "CSV file with a header row");
  app.add_option("--responses", o.responses, "Comma-separated response column names");
  app.add_option("--covariates", o.covariates, "Comma-separated covariate column names");
  app.add_flag("--compositional", o.compositional, "Responses are compositions; take square roots");
  app.add_option("--null", o.null_spec, "isotropic, mean, shape or full, plus ,alpha:k / ,beta:k");
  app.add_option("--statistic", o.statistic, "roc, d, m, lr (comma-separated for several)");
  app.add_option("-B", o.B, "Bootstrap replicates");
  app.add_option("-m", o.m, "Monte Carlo draws per fitted distribution for prediction");
  app.add_option("--levels", o.levels, "Comma-separated levels");
  app.add_option("--mc-size", o.mc_size, "Monte Carlo size for the M statistic");
  app.add_option("--seed", o.seed, "Root seed");
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Report path (default stdout)");
  app.add_flag("--plus-one", o.plus_one, "Use (s + 1) / (B + 1) p-values");
  app.add_option("--x0", o.x0, "Raw covariate values for prediction (repeatable)");
  app.add_option("--quantile", o.quantile, "order or interpolated");
  app.add_option("--optimizer", o.optimizer, "bfgs or nelder-mead");
  app.add_option("--restarts", o.restarts, "Perturbed optimizer restarts");
  app.add_option("--tol", o.tol, "Relative objective tolerance");
  app.add_option("--bins", o.bins, "Histogram bins for the gof report");
  app.add_option("--study", o.study, "rejection or coverage (simulate)");
  app.add_option("--dgm", o.dgm, "Data-generating mechanism (simulate)");
  app.add_option("-r", o.r, "Severity of the data-generating mechanism");
  app.add_option("-n", o.n, "Sample size (simulate, profile)");
  app.add_option("--reps", o.reps, "Simulation replicates");
  app.add_option("--mu", o.mu, "Mean vector (coverage, profile)");
  app.add_option("--gamma", o.gamma, "Shape vector (coverage, profile)");
  app.add_option("--angle", o.angle, "Rotation in degrees about the first axis (profile)");
  app.add_option("--grid", o.grid, "lo,hi,count as multiples of |mu| (profile)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    Outcome result;
    if (o.command == "fit")
      result = cmd_fit(o);
    else if (o.command == "test")
      result = cmd_test(o);
    else if (o.command == "predict")
      result = cmd_predict(o);
    else if (o.command == "gof")
      result = cmd_gof(o);
    else if (o.command == "simulate")
      result = cmd_simulate(o);
    else
      result = cmd_profile(o);
    write(o, result.report);
    if (!result.converged) {
      std::cerr << "warning: a fit did not converge; see the report\n";
      return kExitConvergence;
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
