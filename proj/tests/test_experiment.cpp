#include "robust_ut/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace robust_ut;
using nlohmann::json;

namespace {

json reference_json() {
  return json::parse(R"({"n_sigma": 2, "epsilon": 0.01, "intervals": {"1": [-3, 4], "2": [0, 5]}})");
}

ExperimentConfig reference_config() { return experiment_config_from_json(reference_json()); }

std::vector<std::string> errors_of(const json& j) {
  try {
    experiment_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& s) {
  for (const auto& x : v)
    if (x.find(s) != std::string::npos) return true;
  return false;
}

const MethodOutcome& outcome(const ExperimentReport& r, Method m) {
  for (const auto& o : r.methods)
    if (o.method == m) return o;
  throw std::logic_error("method not in report");
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("robust_ut_test_" + name);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ROBUST_UT_CLI) + " " + args + " > " + temp_file("stdout").string() + " 2> " +
                          temp_file("stderr").string();
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string write_config(const std::string& name, const json& j) {
  const auto p = temp_file(name);
  std::ofstream(p) << j.dump();
  return p.string();
}

}  // namespace

TEST(Config, DefaultsFollowTheExperiment) {
  const auto c = reference_config();
  EXPECT_EQ(c.relaxation_order, 2);
  EXPECT_EQ(c.n_moment_samples, 100u);
  EXPECT_EQ(c.n_distortion_pairs, 500u);
  EXPECT_EQ(c.f.name(), "sin");
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::Naive, Method::OuterBox, Method::MinBall}));
}

TEST(Config, RoundTripsThroughJson) {
  auto j = reference_json();
  j["methods"] = {"mc-oracle", "naive"};
  j["f"] = "poly:0,1,2";
  j["seed"] = 42;
  const auto c = experiment_config_from_json(j);
  json back;
  to_json(back, c);
  const auto d = experiment_config_from_json(back);
  EXPECT_EQ(d.methods, c.methods);
  EXPECT_EQ(d.seed, 42u);
  EXPECT_EQ(d.f.coefficients(), c.f.coefficients());
  EXPECT_EQ(d.spec.intervals, c.spec.intervals);
}

TEST(Config, ErrorsNameFields) {
  auto j = reference_json();
  j["methods"] = {"naive", "chebyshev"};
  j["seed"] = -1;
  j["relaxation_order"] = "two";
  j["f"] = "tan";
  j["epsilon"] = 0.6;
  const auto v = errors_of(j);
  EXPECT_TRUE(mentions(v, "methods[1]"));
  EXPECT_TRUE(mentions(v, "seed"));
  EXPECT_TRUE(mentions(v, "relaxation_order"));
  EXPECT_TRUE(mentions(v, "tan"));
  EXPECT_TRUE(mentions(v, "epsilon"));
  auto k = reference_json();
  k["n_distortion_pairs"] = 0;
  EXPECT_TRUE(mentions(errors_of(k), "n_distortion_pairs"));
  auto m = reference_json();
  m["methods"] = json::array();
  EXPECT_TRUE(mentions(errors_of(m), "methods"));
}

TEST(DeriveSeed, StreamsDiffer) {
  EXPECT_EQ(derive_seed(0, 1), derive_seed(0, 1));
  EXPECT_NE(derive_seed(0, 1), derive_seed(0, 2));
  EXPECT_NE(derive_seed(0, 1), derive_seed(1, 1));
}

TEST(MomentSamples, AdmissibleAndUniform) {
  const auto spec = reference_config().spec;
  const TestFunction f(TestFunction::Kind::Sin);
  const auto s = draw_moment_samples(spec, 2000, f, 3);
  ASSERT_EQ(s.size(), 2000u);
  double mean_mu = 0.0;
  for (const auto& x : s) {
    EXPECT_GE(x.v, x.mu * x.mu);
    EXPECT_GE(x.mu, -3.0);
    EXPECT_LE(x.mu, 4.0);
    EXPECT_LE(x.v, 5.0);
    EXPECT_NEAR(x.truth, ut_eval(two_point_sigma_points(x.mu, x.v), f), 1e-15);
    mean_mu += x.mu / 2000.0;
  }
  // mu given V >= mu^2 lies in [-sqrt(5), sqrt(5)] and is symmetric
  EXPECT_NEAR(mean_mu, 0.0, 0.1);
  EXPECT_THROW(draw_moment_samples(spec, 1, f, 0, 0), SamplingError);
}

TEST(MomentSamples, InadmissibleIntervalsFail) {
  MomentSpec s;
  s.intervals = {{1, {2.0, 3.0}}, {2, {0.0, 1.0}}};
  EXPECT_THROW(draw_moment_samples(s, 1, TestFunction(), 0, 10000), SamplingError);
  MomentSpec no_mean;
  no_mean.intervals = {{2, {0.0, 1.0}}};
  EXPECT_THROW(draw_moment_samples(no_mean, 1, TestFunction(), 0), ConfigError);
}

TEST(RunSolve, ReferenceSpec) {
  auto c = reference_config();
  c.methods = {Method::Naive, Method::OuterBox};
  const auto r = run_solve(c);
  ASSERT_TRUE(outcome(r, Method::Naive).result);
  EXPECT_EQ(outcome(r, Method::Naive).result->center, (std::vector<double>{2.0, -1.0, 0.5, 0.5}));
  const auto& ob = outcome(r, Method::OuterBox);
  ASSERT_TRUE(ob.result) << ob.error;
  const std::vector<double> expect{0.0, 0.0, 0.5, 0.5};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ob.result->center[i], expect[i], 1e-2);
  EXPECT_FALSE(r.any_failure(MethodOutcome::Failure::Solver));
}

TEST(RunSolve, RejectsInfeasibleWeightFloor) {
  auto j = reference_json();
  j["epsilon"] = 0.5;
  EXPECT_TRUE(mentions(errors_of(j), "epsilon"));
  auto c = reference_config();
  c.spec.epsilon = 0.5;
  EXPECT_THROW(run_solve(c), ConfigError);
}

TEST(RunSolve, NaiveFailureDoesNotStopOtherMethods) {
  auto c = reference_config();
  c.spec.intervals = {{1, {1.5, 2.5}}, {2, {0.0, 5.0}}};
  c.methods = {Method::Naive, Method::OuterBox};
  const auto r = run_solve(c);
  EXPECT_EQ(outcome(r, Method::Naive).failure, MethodOutcome::Failure::Config);
  EXPECT_TRUE(outcome(r, Method::OuterBox).result);
}

TEST(RunExperiment, CollapsedIntervalsTie) {
  auto c = reference_config();
  c.spec.intervals.clear();
  c.spec.known = {{1, 0.5}, {2, 2.5}};
  c.methods = {Method::Naive, Method::OuterBox, Method::MinBall};
  c.n_distortion_pairs = 1;
  const auto r = run_experiment(c);
  ASSERT_EQ(r.samples.size(), 100u);
  for (const auto& s : r.samples) {
    ASSERT_EQ(s.errors.size(), 3u);
    for (const auto& e : s.errors) {
      ASSERT_TRUE(e);
      EXPECT_NEAR(*e, *s.errors[0], 1e-9);
      EXPECT_NEAR(*e, 0.0, 1e-9);
    }
  }
  EXPECT_TRUE(r.distortion_error.size() > 0);
}

TEST(RunExperiment, ReferenceSpecNaiveError) {
  auto c = reference_config();
  c.methods = {Method::Naive};
  const auto r = run_experiment(c);
  const auto& n = outcome(r, Method::Naive);
  ASSERT_TRUE(n.mean_error);
  // independent recomputation from the drawn samples
  double sum = 0.0;
  for (const auto& s : r.samples) sum += std::abs(s.truth - 0.5 * (std::sin(2.0) + std::sin(-1.0)));
  EXPECT_NEAR(*n.mean_error, sum / 100.0, 1e-12);
  EXPECT_GT(*n.mean_error, 1e-3);
  ASSERT_TRUE(r.distortion);
  EXPECT_GE(r.distortion->d_max, 0.9);
  EXPECT_LE(r.distortion->d_max, 1.0);
}

TEST(RunExperiment, ReportIsDeterministic) {
  auto c = reference_config();
  c.methods = {Method::Naive, Method::OuterBox, Method::McOracle};
  c.n_distortion_pairs = 50;
  c.n_oracle_samples = 200;
  const auto a = report_json(run_experiment(c), false);
  const auto b = report_json(run_experiment(c), false);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_FALSE(a.contains("timings"));
  for (const auto& m : a["methods"]) {
    double w = 0.0;
    for (double x : m["w"]) w += x;
    EXPECT_NEAR(w, 1.0, 1e-6);
  }
  c.seed = 1;
  EXPECT_NE(report_json(run_experiment(c), false).dump(), a.dump());
}

TEST(Report, CsvColumns) {
  auto c = reference_config();
  c.methods = {Method::Naive, Method::McOracle};
  c.n_moment_samples = 5;
  c.n_distortion_pairs = 5;
  c.n_oracle_samples = 50;
  const auto r = run_experiment(c);
  std::ostringstream os;
  write_csv(r, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "sample_index,mu,v,truth,naive,mc-oracle");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    ++rows;
  }
  EXPECT_EQ(rows, 5);
}

TEST(Cli, SolveReferenceSpec) {
  const auto cfg = write_config("ref.json", reference_json());
  const auto out = temp_file("out.json");
  ASSERT_EQ(run_cli("solve --config " + cfg + " --method naive --out " + out.string()), 0);
  std::ifstream in(out);
  const auto j = json::parse(in);
  EXPECT_EQ(j["methods"][0]["z"], json({2.0, -1.0}));
  EXPECT_TRUE(j.contains("timings"));
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("solve --config /nonexistent/config.json"), 2);
  EXPECT_EQ(run_cli("solve"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
  const auto cfg = write_config("ref.json", reference_json());
  EXPECT_EQ(run_cli("solve --config " + cfg + " --epsilon 0.7"), 2);
  EXPECT_EQ(run_cli("solve --config " + cfg + " --method nope"), 2);
  EXPECT_EQ(run_cli("experiment --config " + cfg + " --f tan"), 2);

  auto bad = reference_json();
  bad["intervals"] = json::parse(R"({"1": [2, 3], "2": [0, 1]})");
  bad["n_distortion_pairs"] = 5;
  const auto bad_cfg = write_config("bad.json", bad);
  EXPECT_EQ(run_cli("solve --config " + bad_cfg + " --method naive"), 2);
  EXPECT_EQ(run_cli("experiment --config " + bad_cfg + " --method naive"), 4);
}

TEST(Cli, ExperimentWritesCsv) {
  auto j = reference_json();
  j["n_distortion_pairs"] = 10;
  j["n_moment_samples"] = 7;
  const auto cfg = write_config("small.json", j);
  const auto csv = temp_file("errors.csv");
  ASSERT_EQ(run_cli("experiment --config " + cfg + " --method naive --csv " + csv.string()), 0);
  std::ifstream in(csv);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 7);
}

TEST(Cli, ShippedConfigParses) {
  std::ifstream in(std::string(ROBUST_UT_CONFIG_DIR) + "/reference.json");
  ASSERT_TRUE(in);
  const auto c = experiment_config_from_json(json::parse(in));
  EXPECT_EQ(c.spec.intervals, reference_config().spec.intervals);
}
