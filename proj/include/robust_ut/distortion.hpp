#pragma once

// The unscented-transform functional UT_f(z, w) = sum_i w_i f(z_i) and a
// sampled estimate of how far UT_f is from an isometry on the sigma-point set.

#include "robust_ut/box.hpp"
#include "robust_ut/errors.hpp"
#include "robust_ut/momentset.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace robust_ut {

class TestFunction {
 public:
  enum class Kind { Sin, Cos, Exp, Identity, Poly };

  TestFunction() = default;
  explicit TestFunction(Kind k) : kind_(k) {
    if (k == Kind::Poly) coeffs_ = {0.0};
  }
  /// Polynomial with coefficients in ascending degree.
  static TestFunction polynomial(std::vector<double> coeffs) {
    for (double c : coeffs)
      if (!std::isfinite(c)) throw ConfigError("polynomial test function has a non-finite coefficient");
    if (coeffs.empty()) coeffs = {0.0};
    TestFunction f(Kind::Poly);
    f.coeffs_ = std::move(coeffs);
    return f;
  }

  /// Parses sin | cos | exp | identity | poly:c0,c1,...
  static TestFunction parse(std::string_view s) {
    if (s == "sin") return TestFunction(Kind::Sin);
    if (s == "cos") return TestFunction(Kind::Cos);
    if (s == "exp") return TestFunction(Kind::Exp);
    if (s == "identity") return TestFunction(Kind::Identity);
    if (s.starts_with("poly:")) {
      std::vector<double> c;
      std::stringstream ss{std::string(s.substr(5))};
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          std::size_t pos = 0;
          c.push_back(std::stod(tok, &pos));
          if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw ConfigError("f: cannot parse polynomial coefficient \"" + tok + "\"");
        }
      }
      if (c.empty()) throw ConfigError("f: polynomial needs at least one coefficient");
      return polynomial(std::move(c));
    }
    throw ConfigError("f: unknown test function \"" + std::string(s) + "\" (expected sin, cos, exp, identity or poly:c0,c1,...)");
  }

  Kind kind() const { return kind_; }
  const std::vector<double>& coefficients() const { return coeffs_; }

  std::string name() const {
    switch (kind_) {
      case Kind::Sin: return "sin";
      case Kind::Cos: return "cos";
      case Kind::Exp: return "exp";
      case Kind::Identity: return "identity";
      case Kind::Poly: {
        std::ostringstream os;
        os.precision(17);
        os << "poly:";
        for (std::size_t i = 0; i < coeffs_.size(); ++i) os << (i ? "," : "") << coeffs_[i];
        return os.str();
      }
    }
    return "?";
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::Sin: return std::sin(x);
      case Kind::Cos: return std::cos(x);
      case Kind::Exp: return std::exp(x);
      case Kind::Identity: return x;
      case Kind::Poly: {
        double s = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) s = s * x + *it;
        return s;
      }
    }
    return 0.0;
  }

 private:
  Kind kind_ = Kind::Sin;
  std::vector<double> coeffs_;
};

inline double ut_eval(const SigmaPointSet& s, const TestFunction& f) {
  double r = 0.0;
  for (std::size_t i = 0; i < s.z.size(); ++i) r += s.w[i] * f(s.z[i]);
  return r;
}

/// Smallest D with (1-D)|x-y| <= |UT(x)-UT(y)| <= (1+D)|x-y|, i.e. |s/r - 1|.
/// Absent when x and y (nearly) coincide.
inline std::optional<double> pair_distortion(std::span<const double> x, std::span<const double> y,
                                             const TestFunction& f, int n_sigma) {
  const auto n = static_cast<std::size_t>(2 * n_sigma);
  if (x.size() != n || y.size() != n)
    throw std::invalid_argument("pair_distortion: expected vectors of length " + std::to_string(n));
  double r2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
  const double r = std::sqrt(r2);
  if (r < 1e-12) return std::nullopt;
  const double s = std::abs(ut_eval(SigmaPointSet::decode(x), f) - ut_eval(SigmaPointSet::decode(y), f));
  return std::abs(s / r - 1.0);
}

struct DistortionEstimate {
  double d_max = 0.0;
  std::vector<double> per_pair;
  std::size_t n_pairs = 0;
  std::size_t skipped = 0;
  double acceptance_rate = 0.0;
};

/// Max pairwise distortion over n_pairs uniformly sampled pairs of the set.
inline DistortionEstimate estimate_distortion(const SemialgebraicSet& set, const Box& box, const TestFunction& f,
                                              std::size_t n_pairs, std::uint64_t seed,
                                              const SamplerOptions& sampler = {}) {
  if (n_pairs == 0) throw ConfigError("n_distortion_pairs must be at least 1");
  const auto samples = sample_set(set, box, 2 * n_pairs, seed, sampler);
  DistortionEstimate est;
  est.n_pairs = n_pairs;
  est.acceptance_rate = samples.acceptance_rate;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const auto d = pair_distortion(samples.points[2 * p], samples.points[2 * p + 1], f, set.n_sigma);
    if (!d) {
      ++est.skipped;
      continue;
    }
    est.per_pair.push_back(*d);
    est.d_max = std::max(est.d_max, *d);
  }
  return est;
}

}  // namespace robust_ut
