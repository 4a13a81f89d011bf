#pragma once

// Robust sigma-point sets: the midpoint ("naive") construction, closed-form
// sets for normal variables, the outer-box Chebyshev center, the
// minimum-enclosing-ball polynomial program, and an exact minimum enclosing
// ball of a finite sample used as a reference.

#include "robust_ut/box.hpp"
#include "robust_ut/errors.hpp"
#include "robust_ut/lasserre.hpp"
#include "robust_ut/momentset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace robust_ut {

enum class Method { Naive, OuterBox, MinBall, McOracle };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Naive: return "naive";
    case Method::OuterBox: return "outer-box";
    case Method::MinBall: return "min-ball";
    case Method::McOracle: return "mc-oracle";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::Naive, Method::OuterBox, Method::MinBall, Method::McOracle})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

struct Diagnostics {
  int relaxation_order = 0;
  std::vector<std::string> solver_statuses;
  std::vector<std::pair<int, int>> flatness_ranks;
  std::vector<std::string> notes;
  /// Membership of the center in S_eps at tolerance 1e-4, when checked.
  std::optional<bool> center_in_set;
};

struct ChebyshevResult {
  std::vector<double> center;  // (z, w)
  std::optional<double> radius;
  Method method = Method::Naive;
  bool certified = false;
  Diagnostics diagnostics;

  SigmaPointSet sigma_points() const { return SigmaPointSet::decode(center); }
};

// ---------------------------------------------------------------------------
// Closed forms

/// Two equally weighted nodes reproducing mean `mu` and second moment `v`.
inline SigmaPointSet two_point_sigma_points(double mu, double v) {
  const double var = v - mu * mu;
  if (!(var >= 0))
    throw std::domain_error("midpoint moments are not a valid (mean, second-moment) pair: V - mu^2 = " +
                            std::to_string(var));
  const double s = std::sqrt(var);
  return {{mu + s, mu - s}, {0.5, 0.5}};
}

namespace detail {
inline std::optional<double> moment_midpoint(const MomentSpec& spec, int k) {
  if (auto it = spec.known.find(k); it != spec.known.end()) return it->second;
  if (auto it = spec.intervals.find(k); it != spec.intervals.end()) return 0.5 * (it->second.first + it->second.second);
  return std::nullopt;
}
}  // namespace detail

inline bool naive_applicable(const MomentSpec& spec) {
  return spec.n_sigma == 2 && detail::moment_midpoint(spec, 1) && detail::moment_midpoint(spec, 2);
}

/// Two-point set built from the midpoints of the first two moment intervals.
inline SigmaPointSet naive_center(const MomentSpec& spec) {
  if (spec.n_sigma != 2) throw ConfigError("naive method requires n_sigma = 2");
  const auto mu = detail::moment_midpoint(spec, 1);
  const auto v = detail::moment_midpoint(spec, 2);
  if (!mu || !v) throw ConfigError("naive method requires moment orders 1 and 2");
  return two_point_sigma_points(*mu, *v);
}

/// Three-point set matching the first five moments of N(mu, variance).
inline SigmaPointSet normal_sigma_points(double mu, double variance) {
  if (!(variance >= 0)) throw std::domain_error("normal_sigma_points: negative variance");
  const double d = std::sqrt(3.0 * variance);
  return {{mu - d, mu, mu + d}, {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}};
}

/// Chebyshev center of the normal sigma-point family when the variance is
/// only known to lie in [v_lo, v_hi].
inline SigmaPointSet normal_interval_center(double mu, double v_lo, double v_hi) {
  if (!(v_lo >= 0) || !(v_lo <= v_hi)) throw std::domain_error("normal_interval_center: need 0 <= v_lo <= v_hi");
  const double d = 0.5 * std::sqrt(3.0) * (std::sqrt(v_lo) + std::sqrt(v_hi));
  return {{mu - d, mu, mu + d}, {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0}};
}

// ---------------------------------------------------------------------------
// Outer box

struct OuterBoxResult {
  Box box;
  /// lower-bound problems for each coordinate, then upper-bound problems
  std::vector<lasserre::PopResult> problems;
  Diagnostics diagnostics;
};

inline std::string coordinate_name(const SemialgebraicSet& set, std::size_t i) {
  const auto ns = static_cast<std::size_t>(set.n_sigma);
  return (i < ns ? "z" + std::to_string(i + 1) : "w" + std::to_string(i - ns + 1));
}

/// Bounds each coordinate over the set from below and above with order-t
/// relaxations. Relaxation bounds (not extracted points) define the box, so
/// it encloses the set even when a relaxation is not exact.
inline OuterBoxResult outer_box(const SemialgebraicSet& set, int order, const lasserre::PopOptions& opts = {}) {
  const std::size_t n = set.n_vars;
  lasserre::PopOptions o = opts;
  if (o.scale_lower.empty()) {
    o.scale_lower = set.prior_box.lower;
    o.scale_upper = set.prior_box.upper;
  }
  std::vector<std::future<lasserre::PopResult>> jobs;
  for (int side = 0; side < 2; ++side)
    for (std::size_t i = 0; i < n; ++i) {
      lasserre::Pop pop{Polynomial::variable(n, i), side == 0 ? lasserre::Sense::Min : lasserre::Sense::Max,
                        set.inequalities, set.equalities, n};
      jobs.push_back(std::async(std::launch::async, [pop = std::move(pop), order, o] {
        return lasserre::pop_bound(pop, order, o);
      }));
    }
  OuterBoxResult res;
  res.diagnostics.relaxation_order = order;
  std::vector<double> lo(n), hi(n);
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    auto r = jobs[k].get();
    const std::size_t i = k % n;
    const bool lower = k < n;
    res.diagnostics.solver_statuses.emplace_back(sdp::to_string(r.solver_status));
    res.diagnostics.flatness_ranks.push_back(r.flatness_ranks);
    if (!r.bound_usable)
      throw SolverError(std::string(lower ? "minimize " : "maximize ") + coordinate_name(set, i) +
                        ": relaxation solve ended with status " + std::string(sdp::to_string(r.solver_status)));
    (lower ? lo : hi)[i] = r.bound;
    res.problems.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (lo[i] > hi[i]) {
      // a (numerically) degenerate coordinate; the gap is solver noise
      if (lo[i] - hi[i] > 1e-6 * (1.0 + std::abs(lo[i])))
        throw SolverError("outer box: crossed bounds for " + coordinate_name(set, i));
      lo[i] = hi[i] = 0.5 * (lo[i] + hi[i]);
    }
  res.box = Box(std::move(lo), std::move(hi));
  return res;
}

/// The Chebyshev center of a box is its midpoint; the radius is half the diagonal.
inline ChebyshevResult box_center(const Box& box) {
  ChebyshevResult r;
  r.center = box.center();
  r.radius = 0.5 * box.diameter();
  r.method = Method::OuterBox;
  return r;
}

// ---------------------------------------------------------------------------
// Minimum enclosing ball as a polynomial program

/// min r  s.t.  r - |x - c|^2 >= 0,  x in the set,  c in the box.
/// Variables (x, c, r); the center c is reported along with sqrt(r).
inline ChebyshevResult min_ball_center(const SemialgebraicSet& set, const Box& box, int order,
                                       const lasserre::PopOptions& opts = {}) {
  const std::size_t n = set.n_vars;
  if (box.dim() != n) throw std::invalid_argument("min_ball_center: box dimension does not match the set");
  const std::size_t N = 2 * n + 1;
  const std::size_t r_var = 2 * n;

  lasserre::Pop pop;
  pop.n_vars = N;
  pop.sense = lasserre::Sense::Min;
  pop.objective = Polynomial::variable(N, r_var);
  for (const auto& g : set.inequalities) pop.inequalities.push_back(poly::embed(g, N, 0));
  for (const auto& h : set.equalities) pop.equalities.push_back(poly::embed(h, N, 0));
  Polynomial dist2(N);
  for (std::size_t i = 0; i < n; ++i) {
    const Polynomial c = Polynomial::variable(N, n + i);
    pop.inequalities.push_back(c - box.lower[i]);
    pop.inequalities.push_back(box.upper[i] - c);
    const Polynomial d = Polynomial::variable(N, i) - c;
    dist2 += d * d;
  }
  pop.inequalities.push_back(Polynomial::variable(N, r_var) - dist2);

  lasserre::PopOptions o = opts;
  o.scale_lower.assign(N, 0.0);
  o.scale_upper.assign(N, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    o.scale_lower[i] = o.scale_lower[n + i] = box.lower[i];
    o.scale_upper[i] = o.scale_upper[n + i] = box.upper[i];
  }
  o.scale_upper[r_var] = std::max(box.diameter() * box.diameter(), 1e-12);
  // The optimal face {x = x_hat} is large and the solver stalls near a
  // relative gap of 1e-7; only the extracted point is used here.
  o.solver.gap_tol = std::max(o.solver.gap_tol, 1e-6);

  const auto pr = lasserre::pop_bound(pop, order, o);
  ChebyshevResult res;
  res.method = Method::MinBall;
  res.diagnostics.relaxation_order = order;
  res.diagnostics.solver_statuses.emplace_back(sdp::to_string(pr.solver_status));
  res.diagnostics.flatness_ranks.push_back(pr.flatness_ranks);
  if (!pr.bound_usable || !pr.point)
    throw SolverError("min-ball relaxation ended with status " + std::string(sdp::to_string(pr.solver_status)));
  const auto& pt = *pr.point;
  std::vector<double> x(pt.begin(), pt.begin() + static_cast<std::ptrdiff_t>(n));
  res.center.assign(pt.begin() + static_cast<std::ptrdiff_t>(n), pt.begin() + static_cast<std::ptrdiff_t>(2 * n));
  const double r2 = pt[r_var];
  res.radius = std::sqrt(std::max(r2, 0.0));
  res.certified = pr.certified;
  res.diagnostics.notes.push_back("squared radius variable r = " + std::to_string(r2) +
                                  "; relaxation bound = " + std::to_string(pr.bound));
  res.diagnostics.notes.push_back(std::string("extracted x in set: ") + (membership(x, set, 1e-4) ? "yes" : "no"));
  res.diagnostics.notes.push_back(std::string("center in box: ") + (box.contains(res.center, 1e-6) ? "yes" : "no"));
  return res;
}

// ---------------------------------------------------------------------------
// Exact minimum enclosing ball of a finite point set (move-to-front Welzl).

namespace detail {

class Miniball {
 public:
  explicit Miniball(const std::vector<std::vector<double>>& pts) : d_(pts.front().size()) {
    for (const auto& p : pts) {
      if (p.size() != d_) throw std::invalid_argument("mc_oracle_center: points differ in dimension");
      list_.emplace_back(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(d_)));
    }
    center_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d_));
    mtf(list_.end(), 0);
  }

  const Eigen::VectorXd& center() const { return center_; }
  double radius() const { return std::sqrt(std::max(r2_, 0.0)); }

 private:
  using It = std::list<Eigen::VectorXd>::iterator;

  bool outside(const Eigen::VectorXd& p) const {
    return (p - center_).squaredNorm() > r2_ * (1.0 + 1e-12) + 1e-18;
  }

  // Ball through the current support set, if it is affinely independent.
  bool ball_of_support() {
    const std::size_t k = support_.size();
    if (k == 0) {
      r2_ = -1.0;
      return true;
    }
    const Eigen::VectorXd& p0 = support_.front();
    if (k == 1) {
      center_ = p0;
      r2_ = 0.0;
      return true;
    }
    const auto m = static_cast<Eigen::Index>(k - 1);
    Eigen::MatrixXd Q(static_cast<Eigen::Index>(d_), m);
    for (Eigen::Index j = 0; j < m; ++j) Q.col(j) = support_[static_cast<std::size_t>(j + 1)] - p0;
    const Eigen::MatrixXd G = Q.transpose() * Q;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(2.0 * G);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd a = lu.solve(Eigen::VectorXd(G.diagonal()));
    center_ = p0 + Q * a;
    r2_ = (Q * a).squaredNorm();
    return true;
  }

  void mtf(It end, std::size_t fixed) {
    support_.resize(fixed);
    ball_of_support();
    if (fixed == d_ + 1) return;
    for (It it = list_.begin(); it != end;) {
      It cur = it++;
      if (!outside(*cur)) continue;
      support_.resize(fixed);
      support_.push_back(*cur);
      if (!ball_of_support()) {
        support_.pop_back();
        ball_of_support();
        continue;
      }
      mtf(cur, fixed + 1);
      list_.splice(list_.begin(), list_, cur);
    }
  }

  std::size_t d_;
  std::list<Eigen::VectorXd> list_;
  std::vector<Eigen::VectorXd> support_;
  Eigen::VectorXd center_;
  double r2_ = -1.0;
};

}  // namespace detail

/// Exact minimum enclosing ball of the samples.
inline ChebyshevResult mc_oracle_center(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw std::invalid_argument("mc_oracle_center: no samples");
  detail::Miniball mb(samples);
  ChebyshevResult r;
  r.method = Method::McOracle;
  r.center.assign(mb.center().data(), mb.center().data() + mb.center().size());
  r.radius = mb.radius();
  r.diagnostics.notes.push_back("minimum enclosing ball of " + std::to_string(samples.size()) + " samples");
  return r;
}

// ---------------------------------------------------------------------------
// Pipeline entry point

struct RobustOptions {
  int relaxation_order = 2;
  lasserre::PopOptions pop;
  std::size_t oracle_samples = 1000;
  std::uint64_t seed = 0;
  /// Below this interval width the relaxations are skipped in favor of the naive set.
  double fallback_gap = 1e-3;
  SamplerOptions sampler;
};

/// Computes robust sigma points for one spec, sharing the set and outer box
/// between methods.
class RobustSigmaPoints {
 public:
  RobustSigmaPoints(MomentSpec spec, RobustOptions opts)
      : spec_(std::move(spec)), opts_(std::move(opts)), set_(build_set(spec_)) {}

  const MomentSpec& spec() const { return spec_; }
  const SemialgebraicSet& set() const { return set_; }
  const RobustOptions& options() const { return opts_; }

  const OuterBoxResult& outer_box() {
    if (!box_) box_ = robust_ut::outer_box(set_, opts_.relaxation_order, opts_.pop);
    return *box_;
  }

  bool use_fallback() const { return set_.max_gap < opts_.fallback_gap && naive_applicable(spec_); }

  ChebyshevResult compute(Method m) {
    if (m == Method::Naive || (m != Method::McOracle && use_fallback())) {
      ChebyshevResult r;
      r.method = m;
      r.center = naive_center(spec_).encode();
      if (m != Method::Naive) r.diagnostics.notes.push_back("naive-fallback");
      r.diagnostics.center_in_set = membership(r.center, set_, 1e-4);
      return r;
    }
    ChebyshevResult r;
    switch (m) {
      case Method::OuterBox: {
        const auto& ob = outer_box();
        r = box_center(ob.box);
        r.diagnostics = ob.diagnostics;
        r.certified = std::all_of(ob.problems.begin(), ob.problems.end(), [](const auto& p) { return p.certified; });
        break;
      }
      case Method::MinBall:
        r = min_ball_center(set_, outer_box().box, opts_.relaxation_order, opts_.pop);
        break;
      case Method::McOracle: {
        const Box& b = use_fallback() ? set_.prior_box : outer_box().box;
        auto samples = sample_set(set_, b, opts_.oracle_samples, opts_.seed, opts_.sampler);
        r = mc_oracle_center(samples.points);
        r.diagnostics.notes.push_back("sampler acceptance rate " + std::to_string(samples.acceptance_rate));
        break;
      }
      case Method::Naive: break;
    }
    r.diagnostics.center_in_set = membership(r.center, set_, 1e-4);
    return r;
  }

 private:
  MomentSpec spec_;
  RobustOptions opts_;
  SemialgebraicSet set_;
  std::optional<OuterBoxResult> box_;
};

}  // namespace robust_ut
