// robust-ut: robust sigma points for moment intervals.
//
//   robust-ut solve      --config cfg.json [--method outer-box ...]
//   robust-ut experiment --config cfg.json [--csv errors.csv]
//   robust-ut distortion --config cfg.json [--f cos]
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure,
// 4 sampling failure, 1 anything else.

#include "robust_ut/robust_ut.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using robust_ut::ConfigError;
using robust_ut::ExperimentConfig;
using robust_ut::ExperimentReport;
using robust_ut::MethodOutcome;
using json = nlohmann::json;

constexpr int kOk = 0, kConfig = 2, kSolver = 3, kSampling = 4;

struct Overrides {
  std::string config_path;
  std::vector<std::string> methods;
  std::optional<int> order;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> f;
  std::string out, csv;
  bool no_timings = false;
};

ExperimentConfig load_config(const Overrides& o) {
  std::ifstream in(o.config_path);
  if (!in) throw ConfigError("cannot open config file " + o.config_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(o.config_path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(o.config_path + ": config must be a JSON object");
  if (!o.methods.empty()) j["methods"] = o.methods;
  if (o.order) j["relaxation_order"] = *o.order;
  if (o.epsilon) j["epsilon"] = *o.epsilon;
  if (o.seed) j["seed"] = *o.seed;
  if (o.f) j["f"] = *o.f;
  return robust_ut::experiment_config_from_json(j);
}

void emit(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

int report_status(const ExperimentReport& r) {
  if (r.any_failure(MethodOutcome::Failure::Config)) return kConfig;
  if (r.any_failure(MethodOutcome::Failure::Solver)) return kSolver;
  if (r.any_failure(MethodOutcome::Failure::Sampling) || !r.distortion_error.empty()) return kSampling;
  return kOk;
}

void print_failures(const ExperimentReport& r) {
  for (const auto& m : r.methods)
    if (!m.error.empty()) std::cerr << "robust-ut: " << robust_ut::to_string(m.method) << ": " << m.error << '\n';
  if (!r.distortion_error.empty()) std::cerr << "robust-ut: distortion: " << r.distortion_error << '\n';
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "moment-spec JSON config")->required();
  cmd->add_option("--method", o.methods, "naive | outer-box | min-ball | mc-oracle (repeatable)");
  cmd->add_option("--order", o.order, "relaxation order");
  cmd->add_option("--epsilon", o.epsilon, "weight floor");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--f", o.f, "sin | cos | exp | identity | poly:c0,c1,...");
  cmd->add_option("--out", o.out, "output JSON path (default stdout)");
  cmd->add_flag("--no-timings", o.no_timings, "omit timing fields from the report");
}

int run(int argc, char** argv) {
  CLI::App app{"Robust sigma points for unscented transforms with interval-bounded moments"};
  app.require_subcommand(1);
  Overrides o;
  auto* solve = app.add_subcommand("solve", "compute sigma points for each method");
  auto* experiment = app.add_subcommand("experiment", "sigma points, mean UT error over drawn moments, distortion");
  auto* distortion = app.add_subcommand("distortion", "estimate the distortion of the UT functional");
  for (auto* c : {solve, experiment, distortion}) add_common(c, o);
  experiment->add_option("--csv", o.csv, "per-sample error CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    const ExperimentConfig cfg = load_config(o);
    if (*solve) {
      const auto rep = robust_ut::run_solve(cfg);
      emit(robust_ut::report_json(rep, !o.no_timings), o.out);
      print_failures(rep);
      return report_status(rep);
    }
    if (*experiment) {
      const auto rep = robust_ut::run_experiment(cfg);
      emit(robust_ut::report_json(rep, !o.no_timings), o.out);
      if (!o.csv.empty()) {
        std::ofstream csv(o.csv);
        if (!csv) throw ConfigError("cannot write " + o.csv);
        robust_ut::write_csv(rep, csv);
      }
      print_failures(rep);
      return report_status(rep);
    }
    json j;
    robust_ut::to_json(j["config"], cfg);
    j["distortion"] = robust_ut::distortion_json(robust_ut::run_distortion(cfg));
    emit(j, o.out);
    return kOk;
  } catch (const ConfigError& e) {
    for (const auto& v : e.violations()) std::cerr << "robust-ut: config: " << v << '\n';
    return kConfig;
  } catch (const robust_ut::SolverError& e) {
    std::cerr << "robust-ut: solver: " << e.what() << '\n';
    return kSolver;
  } catch (const robust_ut::SamplingError& e) {
    std::cerr << "robust-ut: sampling: " << e.what() << '\n';
    return kSampling;
  } catch (const std::exception& e) {
    std::cerr << "robust-ut: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
