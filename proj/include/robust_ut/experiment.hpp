#pragma once

// Experiment pipelines behind the command-line tool: sigma points per method,
// mean UT error over randomly drawn moment pairs, and the distortion estimate.
//
// Ground truth for a drawn pair (mu, V) is the two-point UT at exactly those
// moments; only moment information is available per draw, not a density.

#include "robust_ut/distortion.hpp"
#include "robust_ut/errors.hpp"
#include "robust_ut/momentset.hpp"
#include "robust_ut/robustut.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace robust_ut {

struct ExperimentConfig {
  MomentSpec spec;
  std::vector<Method> methods{Method::Naive, Method::OuterBox, Method::MinBall};
  int relaxation_order = 2;
  std::size_t n_moment_samples = 100;
  std::size_t n_distortion_pairs = 500;
  std::size_t n_oracle_samples = 1000;
  TestFunction f{TestFunction::Kind::Sin};
  std::uint64_t seed = 0;

  std::vector<std::string> violations() const {
    auto v = spec.violations();
    if (methods.empty()) v.push_back("methods: at least one method is required");
    if (relaxation_order < 1) v.push_back("relaxation_order: must be at least 1");
    if (n_distortion_pairs == 0) v.push_back("n_distortion_pairs: must be at least 1");
    if (n_oracle_samples < 2) v.push_back("n_oracle_samples: must be at least 2");
    return v;
  }
  void validate() const {
    auto v = violations();
    if (!v.empty()) throw ConfigError(std::move(v));
  }
};

/// Moment-spec fields plus methods, relaxation_order, n_moment_samples,
/// n_distortion_pairs, n_oracle_samples, f and seed, all at the top level.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  std::vector<std::string> errs;
  try {
    c.spec = moment_spec_from_json(j);
  } catch (const ConfigError& e) {
    errs = e.violations();
  }
  auto count = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    const auto& v = j[key];
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0))
      out = static_cast<std::remove_reference_t<decltype(out)>>(v.get<unsigned long long>());
    else
      errs.push_back(std::string(key) + ": expected a non-negative integer");
  };
  if (j.contains("methods")) {
    if (!j["methods"].is_array()) {
      errs.push_back("methods: expected an array of method names");
    } else {
      c.methods.clear();
      for (std::size_t i = 0; i < j["methods"].size(); ++i) {
        const auto& m = j["methods"][i];
        const auto parsed = m.is_string() ? parse_method(m.get<std::string>()) : std::nullopt;
        if (!parsed)
          errs.push_back("methods[" + std::to_string(i) + "]: expected one of naive, outer-box, min-ball, mc-oracle");
        else
          c.methods.push_back(*parsed);
      }
    }
  }
  if (j.contains("relaxation_order")) {
    if (j["relaxation_order"].is_number_integer()) c.relaxation_order = j["relaxation_order"].get<int>();
    else errs.push_back("relaxation_order: expected an integer");
  }
  count("n_moment_samples", c.n_moment_samples);
  count("n_distortion_pairs", c.n_distortion_pairs);
  count("n_oracle_samples", c.n_oracle_samples);
  count("seed", c.seed);
  if (j.contains("f")) {
    if (!j["f"].is_string()) {
      errs.push_back("f: expected a string");
    } else {
      try {
        c.f = TestFunction::parse(j["f"].get<std::string>());
      } catch (const ConfigError& e) {
        errs.insert(errs.end(), e.violations().begin(), e.violations().end());
      }
    }
  }
  if (!errs.empty()) throw ConfigError(std::move(errs));
  c.validate();
  return c;
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  to_json(j, c.spec);
  j["methods"] = nlohmann::json::array();
  for (Method m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  j["relaxation_order"] = c.relaxation_order;
  j["n_moment_samples"] = c.n_moment_samples;
  j["n_distortion_pairs"] = c.n_distortion_pairs;
  j["n_oracle_samples"] = c.n_oracle_samples;
  j["f"] = c.f.name();
  j["seed"] = c.seed;
}

/// Independent 64-bit seed for a named stream of one run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

enum class Stream : std::uint32_t { Moments = 1, Oracle = 2, Distortion = 3 };

struct MethodOutcome {
  Method method = Method::Naive;
  std::optional<ChebyshevResult> result;
  std::string error;                   // empty on success
  enum class Failure { None, Solver, Sampling, Config } failure = Failure::None;
  std::optional<double> mean_error;
  double seconds = 0.0;
};

struct MomentSample {
  double mu = 0.0, v = 0.0, truth = 0.0;
  std::vector<std::optional<double>> errors;  // per method, absent when the method failed
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<MethodOutcome> methods;
  std::vector<MomentSample> samples;
  std::optional<DistortionEstimate> distortion;
  std::string distortion_error;
  std::map<std::string, double> timings;

  bool any_failure(MethodOutcome::Failure f) const {
    for (const auto& m : methods)
      if (m.failure == f) return true;
    return false;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline RobustOptions robust_options(const ExperimentConfig& c) {
  RobustOptions o;
  o.relaxation_order = c.relaxation_order;
  o.oracle_samples = c.n_oracle_samples;
  o.seed = derive_seed(c.seed, static_cast<std::uint32_t>(Stream::Oracle));
  return o;
}

inline std::pair<double, double> moment_range(const MomentSpec& spec, int k) {
  if (auto it = spec.known.find(k); it != spec.known.end()) return {it->second, it->second};
  if (auto it = spec.intervals.find(k); it != spec.intervals.end()) return it->second;
  throw ConfigError("experiment: moment order " + std::to_string(k) + " must be known or bounded by an interval");
}

inline std::vector<MethodOutcome> solve_methods(const ExperimentConfig& c, RobustSigmaPoints& rsp) {
  std::vector<MethodOutcome> out;
  for (Method m : c.methods) {
    MethodOutcome o;
    o.method = m;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o.result = rsp.compute(m);
    } catch (const SolverError& e) {
      o.failure = MethodOutcome::Failure::Solver;
      o.error = e.what();
    } catch (const SamplingError& e) {
      o.failure = MethodOutcome::Failure::Sampling;
      o.error = e.what();
    } catch (const ConfigError& e) {
      o.failure = MethodOutcome::Failure::Config;
      o.error = e.what();
    } catch (const std::domain_error& e) {
      o.failure = MethodOutcome::Failure::Config;
      o.error = e.what();
    }
    o.seconds = seconds_since(t0);
    out.push_back(std::move(o));
  }
  return out;
}

inline DistortionEstimate distortion_for(const ExperimentConfig& c, RobustSigmaPoints& rsp) {
  if (c.n_distortion_pairs == 0) throw ConfigError("n_distortion_pairs: must be at least 1");
  const Box& box = rsp.use_fallback() ? rsp.set().prior_box : rsp.outer_box().box;
  return estimate_distortion(rsp.set(), box, c.f, c.n_distortion_pairs,
                             derive_seed(c.seed, static_cast<std::uint32_t>(Stream::Distortion)));
}

}  // namespace detail

/// Draws (mu, V) uniformly from the order-1 and order-2 ranges, redrawing
/// pairs with V < mu^2.
inline std::vector<MomentSample> draw_moment_samples(const MomentSpec& spec, std::size_t count, const TestFunction& f,
                                                     std::uint64_t seed, std::size_t max_draws = 1'000'000) {
  const auto [mu_lo, mu_hi] = detail::moment_range(spec, 1);
  const auto [v_lo, v_hi] = detail::moment_range(spec, 2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MomentSample> out;
  out.reserve(count);
  std::size_t draws = 0;
  while (out.size() < count) {
    if (draws++ >= max_draws)
      throw SamplingError("moment sampling: no admissible (mu, V) pair with V >= mu^2 after " +
                          std::to_string(max_draws) + " draws");
    MomentSample s;
    s.mu = mu_lo + (mu_hi - mu_lo) * u(rng);
    s.v = v_lo + (v_hi - v_lo) * u(rng);
    if (s.v < s.mu * s.mu) continue;
    s.truth = ut_eval(two_point_sigma_points(s.mu, s.v), f);
    out.push_back(s);
  }
  return out;
}

inline ExperimentReport run_solve(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport rep;
  rep.config = config;
  const auto t0 = std::chrono::steady_clock::now();
  RobustSigmaPoints rsp(config.spec, detail::robust_options(config));
  rep.methods = detail::solve_methods(config, rsp);
  rep.timings["solve"] = detail::seconds_since(t0);
  return rep;
}

inline DistortionEstimate run_distortion(const ExperimentConfig& config) {
  config.validate();
  RobustSigmaPoints rsp(config.spec, detail::robust_options(config));
  return detail::distortion_for(config, rsp);
}

/// Sigma points per method, then the mean |truth - UT| over drawn moment
/// pairs (one sample stream shared by all methods), then the distortion.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport rep;
  rep.config = config;
  RobustSigmaPoints rsp(config.spec, detail::robust_options(config));

  auto t0 = std::chrono::steady_clock::now();
  rep.methods = detail::solve_methods(config, rsp);
  rep.timings["solve"] = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  rep.samples = draw_moment_samples(config.spec, config.n_moment_samples, config.f,
                                    derive_seed(config.seed, static_cast<std::uint32_t>(Stream::Moments)));
  for (auto& m : rep.methods) {
    if (!m.result) continue;
    const double ut = ut_eval(m.result->sigma_points(), config.f);
    double sum = 0.0;
    for (const auto& s : rep.samples) sum += std::abs(s.truth - ut);
    if (!rep.samples.empty()) m.mean_error = sum / static_cast<double>(rep.samples.size());
  }
  for (auto& s : rep.samples)
    for (const auto& m : rep.methods)
      s.errors.push_back(m.result ? std::optional<double>(std::abs(s.truth - ut_eval(m.result->sigma_points(), config.f)))
                                  : std::nullopt);
  rep.timings["errors"] = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  try {
    rep.distortion = detail::distortion_for(config, rsp);
  } catch (const SamplingError& e) {
    rep.distortion_error = e.what();
  } catch (const SolverError& e) {
    rep.distortion_error = e.what();
  }
  rep.timings["distortion"] = detail::seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json diagnostics_json(const Diagnostics& d) {
  nlohmann::json j;
  j["relaxation_order"] = d.relaxation_order;
  j["solver_statuses"] = d.solver_statuses;
  j["flatness_ranks"] = nlohmann::json::array();
  for (const auto& [a, b] : d.flatness_ranks) j["flatness_ranks"].push_back({a, b});
  j["notes"] = d.notes;
  j["center_in_set"] = d.center_in_set ? nlohmann::json(*d.center_in_set) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json outcome_json(const MethodOutcome& o, bool timings) {
  nlohmann::json j;
  j["method"] = std::string(to_string(o.method));
  if (o.result) {
    const auto s = o.result->sigma_points();
    j["z"] = s.z;
    j["w"] = s.w;
    j["radius"] = o.result->radius ? nlohmann::json(*o.result->radius) : nlohmann::json(nullptr);
    j["certified"] = o.result->certified;
    j["diagnostics"] = diagnostics_json(o.result->diagnostics);
  } else {
    j["error"] = o.error;
  }
  if (o.mean_error) j["mean_error"] = *o.mean_error;
  if (timings) j["seconds"] = o.seconds;
  return j;
}

inline nlohmann::json distortion_json(const DistortionEstimate& d) {
  return {{"d_max", d.d_max},
          {"n_pairs", d.n_pairs},
          {"skipped", d.skipped},
          {"acceptance_rate", d.acceptance_rate}};
}

/// Whole report; timing fields are omitted when `timings` is false so that
/// reports of identical runs compare equal.
inline nlohmann::json report_json(const ExperimentReport& r, bool timings = true) {
  nlohmann::json j;
  to_json(j["config"], r.config);
  j["methods"] = nlohmann::json::array();
  for (const auto& m : r.methods) j["methods"].push_back(outcome_json(m, timings));
  if (!r.samples.empty()) j["n_samples"] = r.samples.size();
  if (r.distortion) j["distortion"] = distortion_json(*r.distortion);
  if (!r.distortion_error.empty()) j["distortion_error"] = r.distortion_error;
  if (timings) j["timings"] = r.timings;
  return j;
}

/// Per-sample errors: sample_index, mu, v, truth, then one column per method.
inline void write_csv(const ExperimentReport& r, std::ostream& os) {
  os << "sample_index,mu,v,truth";
  for (const auto& m : r.methods) os << ',' << to_string(m.method);
  os << '\n';
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    os << i << ',' << s.mu << ',' << s.v << ',' << s.truth;
    for (const auto& e : s.errors) {
      os << ',';
      if (e) os << *e;
    }
    os << '\n';
  }
  os.precision(old);
}

}  // namespace robust_ut
