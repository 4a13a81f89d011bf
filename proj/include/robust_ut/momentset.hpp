#pragma once

// Moment specifications with exact and interval-bounded moments, the
// semialgebraic set of compatible sigma points and weights, membership, and
// rejection sampling.

#include "robust_ut/box.hpp"
#include "robust_ut/errors.hpp"
#include "robust_ut/poly.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <algorithm>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace robust_ut {

using poly::Polynomial;

struct MomentSpec {
  std::map<int, double> known;                         // order -> E{X^k}
  std::map<int, std::pair<double, double>> intervals;  // order -> (lower, upper)
  double epsilon = 0.01;                               // weight floor
  int n_sigma = 2;

  int max_order() const {
    int k = 0;
    if (!known.empty()) k = known.rbegin()->first;
    if (!intervals.empty()) k = std::max(k, intervals.rbegin()->first);
    return k;
  }

  /// Tightest upper bound on some even-order moment, as (order, bound).
  std::optional<std::pair<int, double>> even_upper_bound() const {
    std::optional<std::pair<int, double>> best;
    double best_radius = std::numeric_limits<double>::infinity();
    auto consider = [&](int k, double u) {
      if (k % 2 != 0 || u < 0) return;
      const double r = std::pow(u / epsilon, 1.0 / k);
      if (!best || r < best_radius) {
        best = {k, u};
        best_radius = r;
      }
    };
    for (const auto& [k, v] : known) consider(k, v);
    for (const auto& [k, iv] : intervals) consider(k, iv.second);
    return best;
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (n_sigma < 1) v.push_back("n_sigma must be at least 1");
    if (!(epsilon > 0)) v.push_back("epsilon must be positive");
    else if (n_sigma >= 1 && !(epsilon < 1.0 / n_sigma))
      v.push_back("epsilon must be below 1/n_sigma = " + std::to_string(1.0 / std::max(1, n_sigma)));
    for (const auto& [k, val] : known) {
      if (k < 1) v.push_back("known moment order " + std::to_string(k) + " must be >= 1");
      if (!std::isfinite(val)) v.push_back("known moment " + std::to_string(k) + " is not finite");
      if (intervals.count(k)) v.push_back("moment order " + std::to_string(k) + " is both known and interval-bounded");
      if (k % 2 == 0 && val < 0) v.push_back("even moment " + std::to_string(k) + " cannot be negative");
    }
    for (const auto& [k, iv] : intervals) {
      if (k < 1) v.push_back("interval moment order " + std::to_string(k) + " must be >= 1");
      if (!std::isfinite(iv.first) || !std::isfinite(iv.second))
        v.push_back("interval for moment " + std::to_string(k) + " is not finite");
      else if (iv.first > iv.second)
        v.push_back("interval for moment " + std::to_string(k) + " has lower > upper");
      else if (k % 2 == 0 && iv.second < 0)
        v.push_back("even moment " + std::to_string(k) + " cannot have a negative upper bound");
    }
    if (epsilon > 0 && !even_upper_bound())
      v.push_back("unbounded set: no even-order moment has an upper bound");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) throw ConfigError(std::move(v));
  }
};

inline void to_json(nlohmann::json& j, const MomentSpec& s) {
  j = nlohmann::json{{"n_sigma", s.n_sigma}, {"epsilon", s.epsilon}};
  j["known"] = nlohmann::json::object();
  for (const auto& [k, v] : s.known) j["known"][std::to_string(k)] = v;
  j["intervals"] = nlohmann::json::object();
  for (const auto& [k, iv] : s.intervals) j["intervals"][std::to_string(k)] = {iv.first, iv.second};
}

/// Parses the moment-spec schema. Errors name the offending field path.
inline MomentSpec moment_spec_from_json(const nlohmann::json& j, const std::string& path = "") {
  std::vector<std::string> errs;
  MomentSpec s;
  auto field = [&](const char* name) { return path + name; };
  if (!j.is_object()) throw ConfigError(path.empty() ? "config must be a JSON object" : path + " must be an object");
  if (j.contains("n_sigma")) {
    if (j["n_sigma"].is_number_integer()) s.n_sigma = j["n_sigma"].get<int>();
    else errs.push_back(field("n_sigma") + ": expected an integer");
  }
  if (j.contains("epsilon")) {
    if (j["epsilon"].is_number()) s.epsilon = j["epsilon"].get<double>();
    else errs.push_back(field("epsilon") + ": expected a number");
  }
  auto order_of = [&](const std::string& key, const std::string& where) -> std::optional<int> {
    try {
      std::size_t pos = 0;
      int k = std::stoi(key, &pos);
      if (pos == key.size()) return k;
    } catch (const std::exception&) {
    }
    errs.push_back(where + ": key \"" + key + "\" is not a decimal moment order");
    return std::nullopt;
  };
  if (j.contains("known")) {
    if (!j["known"].is_object()) errs.push_back(field("known") + ": expected an object");
    else
      for (const auto& [key, val] : j["known"].items()) {
        const auto where = field("known.") + key;
        auto k = order_of(key, where);
        if (!val.is_number()) errs.push_back(where + ": expected a number");
        else if (k) s.known[*k] = val.get<double>();
      }
  }
  if (j.contains("intervals")) {
    if (!j["intervals"].is_object()) errs.push_back(field("intervals") + ": expected an object");
    else
      for (const auto& [key, val] : j["intervals"].items()) {
        const auto where = field("intervals.") + key;
        auto k = order_of(key, where);
        if (!val.is_array() || val.size() != 2 || !val[0].is_number() || !val[1].is_number())
          errs.push_back(where + ": expected [lower, upper]");
        else if (k) s.intervals[*k] = {val[0].get<double>(), val[1].get<double>()};
      }
  }
  if (!errs.empty()) throw ConfigError(std::move(errs));
  auto v = s.violations();
  for (auto& x : v) x = (path.empty() ? "" : path + ": ") + x;
  if (!v.empty()) throw ConfigError(std::move(v));
  return s;
}

struct SigmaPointSet {
  std::vector<double> z;  // nodes
  std::vector<double> w;  // weights

  std::size_t size() const { return z.size(); }

  /// Splits a (z_1..z_n, w_1..w_n) vector.
  static SigmaPointSet decode(std::span<const double> x) {
    if (x.size() % 2 != 0) throw std::invalid_argument("SigmaPointSet::decode: odd length");
    const std::size_t n = x.size() / 2;
    return {{x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)}, {x.begin() + static_cast<std::ptrdiff_t>(n), x.end()}};
  }

  std::vector<double> encode() const {
    std::vector<double> x(z);
    x.insert(x.end(), w.begin(), w.end());
    return x;
  }

  double moment(int k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += w[i] * std::pow(z[i], k);
    return s;
  }

  double weight_sum() const {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
  }
};

/// Feasible (z, w) vectors for a moment spec. Variable layout is
/// (z_1..z_n, w_1..w_n).
struct SemialgebraicSet {
  int n_sigma = 0;
  std::size_t n_vars = 0;
  double epsilon = 0.0;
  /// weight floors first, then per interval order: upper, lower
  std::vector<Polynomial> inequalities;
  /// normalization first, then one per known moment
  std::vector<Polynomial> equalities;
  /// Coordinate bounds implied by the weight floor and the tightest even-order
  /// upper bound: |z_i| <= (U_k / eps)^(1/k), eps <= w_i <= 1 - (n-1) eps.
  Box prior_box;
  /// Largest interval width (u_k - l_k); 0 when every moment is exact.
  double max_gap = 0.0;
};

/// sum_i w_i z_i^k over the (z, w) layout.
inline Polynomial moment_polynomial(int n_sigma, int k) {
  const auto n = static_cast<std::size_t>(2 * n_sigma);
  Polynomial p(n);
  for (int i = 0; i < n_sigma; ++i) {
    std::vector<int> e(n, 0);
    e[static_cast<std::size_t>(i)] = k;
    e[static_cast<std::size_t>(n_sigma + i)] = 1;
    p.add_term(poly::Monomial(std::move(e)), 1.0);
  }
  return p;
}

inline SemialgebraicSet build_set(const MomentSpec& spec) {
  spec.validate();
  SemialgebraicSet s;
  s.n_sigma = spec.n_sigma;
  s.n_vars = static_cast<std::size_t>(2 * spec.n_sigma);
  s.epsilon = spec.epsilon;
  const std::size_t n = s.n_vars;
  for (int i = 0; i < spec.n_sigma; ++i)
    s.inequalities.push_back(Polynomial::variable(n, static_cast<std::size_t>(spec.n_sigma + i)) - spec.epsilon);
  Polynomial total(n);
  for (int i = 0; i < spec.n_sigma; ++i) total += Polynomial::variable(n, static_cast<std::size_t>(spec.n_sigma + i));
  s.equalities.push_back(total - 1.0);
  for (const auto& [k, v] : spec.known) s.equalities.push_back(moment_polynomial(spec.n_sigma, k) - v);
  for (const auto& [k, iv] : spec.intervals) {
    const Polynomial m = moment_polynomial(spec.n_sigma, k);
    s.inequalities.push_back(iv.second - m);
    s.inequalities.push_back(m - iv.first);
    s.max_gap = std::max(s.max_gap, iv.second - iv.first);
  }
  const auto [k, u] = *spec.even_upper_bound();
  const double r = std::pow(u / spec.epsilon, 1.0 / k);
  std::vector<double> lo(n), hi(n);
  for (int i = 0; i < spec.n_sigma; ++i) {
    lo[static_cast<std::size_t>(i)] = -r;
    hi[static_cast<std::size_t>(i)] = r;
    lo[static_cast<std::size_t>(spec.n_sigma + i)] = spec.epsilon;
    hi[static_cast<std::size_t>(spec.n_sigma + i)] = 1.0 - (spec.n_sigma - 1) * spec.epsilon;
  }
  s.prior_box = Box(std::move(lo), std::move(hi));
  return s;
}

inline bool membership(std::span<const double> x, const SemialgebraicSet& set, double tol) {
  if (x.size() != set.n_vars)
    throw std::invalid_argument("membership: point has " + std::to_string(x.size()) + " coordinates, expected " +
                                std::to_string(set.n_vars));
  for (const auto& h : set.equalities)
    if (!(std::abs(h.eval(x)) <= tol)) return false;
  for (const auto& g : set.inequalities)
    if (!(g.eval(x) >= -tol)) return false;
  return true;
}

struct SamplerOptions {
  std::uint64_t max_proposals = 10'000'000;
  double min_acceptance = 1e-5;
  double member_tol = 1e-9;
};

struct SampleResult {
  std::vector<std::vector<double>> points;
  std::uint64_t proposals = 0;
  double acceptance_rate = 0.0;
};

/// Uniform rejection sampling of the set from an enclosing box. The last
/// weight is eliminated through the normalization equality, so proposals
/// are uniform on the box's slice of the simplex hyperplane; any further
/// equality (an exactly known moment) makes the target measure-zero and
/// ends in a SamplingError.
inline SampleResult sample_set(const SemialgebraicSet& set, const Box& box, std::size_t count, std::uint64_t seed,
                               const SamplerOptions& opts = {}) {
  if (box.dim() != set.n_vars) throw std::invalid_argument("sample_set: box dimension does not match the set");
  SampleResult res;
  if (count == 0) return res;
  std::mt19937_64 rng(seed);
  const std::size_t n = set.n_vars;
  const auto ns = static_cast<std::size_t>(set.n_sigma);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (std::size_t i = 0; i + 1 < n; ++i) dist.emplace_back(box.lower[i], box.upper[i]);
  std::vector<double> x(n);
  while (res.points.size() < count) {
    if (res.proposals >= opts.max_proposals) {
      const double rate = static_cast<double>(res.points.size()) / static_cast<double>(res.proposals);
      if (rate < opts.min_acceptance)
        throw SamplingError("rejection sampling accepted " + std::to_string(res.points.size()) + " of " +
                            std::to_string(res.proposals) + " proposals (rate " + std::to_string(rate) +
                            "); tighten the box or use a hit-and-run sampler");
    }
    ++res.proposals;
    double wsum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      x[i] = dist[i](rng);
      if (i >= ns) wsum += x[i];
    }
    x[n - 1] = 1.0 - wsum;
    if (membership(x, set, opts.member_tol)) res.points.push_back(x);
  }
  res.acceptance_rate = static_cast<double>(res.points.size()) / static_cast<double>(res.proposals);
  return res;
}

}  // namespace robust_ut
