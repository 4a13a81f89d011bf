#pragma once

// Moment (Lasserre) relaxations of polynomial optimization problems.
//
// The truncated moment vector y, indexed by basis(n, 2t), is the dual
// variable of a block SDP: the moment matrix M_t(y) and one localizing
// matrix per inequality form the PSD slack S = C - sum y_j A_j. Linear
// equalities on y (y_0 = 1 and the ideal generated by each equality
// constraint) are eliminated up front, so the SDP only sees the free
// moment coordinates.

#include "robust_ut/poly.hpp"
#include "robust_ut/sdp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace robust_ut::lasserre {

using poly::Monomial;
using poly::Polynomial;

enum class Sense { Min, Max };

struct Pop {
  Polynomial objective;
  Sense sense = Sense::Min;
  std::vector<Polynomial> inequalities;  // g(x) >= 0
  std::vector<Polynomial> equalities;    // h(x) == 0
  std::size_t n_vars = 0;

  void validate() const {
    if (n_vars == 0) throw std::invalid_argument("Pop: n_vars must be positive");
    auto check = [this](const Polynomial& p, const std::string& what) {
      if (p.n_vars() != n_vars)
        throw std::invalid_argument("Pop: " + what + " has " + std::to_string(p.n_vars()) + " variables, expected " +
                                    std::to_string(n_vars));
    };
    check(objective, "objective");
    for (const auto& g : inequalities) check(g, "inequality");
    for (const auto& h : equalities) check(h, "equality");
  }

  /// Smallest t with every polynomial degree <= 2t.
  int minimal_order() const {
    int d = std::max(1, objective.degree());
    for (const auto& g : inequalities) d = std::max(d, g.degree());
    for (const auto& h : equalities) d = std::max(d, h.degree());
    return (d + 1) / 2;
  }
};

struct MomentRelaxation {
  int order = 0;
  Pop pop;
  sdp::SdpProblem sdp;
  std::vector<Monomial> moment_basis;  // basis(n, 2t)
  /// SDP coordinate of each moment, or -1 when it was eliminated.
  std::vector<int> index_map;
  /// Full moment vector as an affine function of the SDP variables: y = offset + map * y_free.
  Eigen::VectorXd offset;
  Eigen::MatrixXd map;
  double objective_constant = 0.0;  // objective at y = offset
  std::size_t moment_block_dim = 0;

  Eigen::VectorXd full_moments(const Eigen::VectorXd& y_free) const { return offset + map * y_free; }
};

struct PopResult {
  double bound = std::numeric_limits<double>::quiet_NaN();
  bool bound_usable = false;
  std::optional<std::vector<double>> point;
  bool certified = false;
  int order_used = 0;
  std::pair<int, int> flatness_ranks{0, 0};
  sdp::Status solver_status = sdp::Status::NumericalTrouble;
  int iterations = 0;
};

struct PopOptions {
  sdp::SolverOptions solver;
  double feas_tol = 1e-6;
  double cert_tol = 1e-6;
  double rank_tol = 1e-6;
  /// Per-variable bounds used to map each variable affinely onto [-1, 1]
  /// before relaxing. They must contain the feasible set: the matching ball
  /// constraint is added to the relaxation. Empty means no scaling.
  std::vector<double> scale_lower, scale_upper;
  /// Retry extraction on a minimum-trace solution of the optimal face when
  /// the first solution does not certify.
  bool refine = true;
};

namespace detail {

/// Row-reduces E y = e. Returns pivot column per kept row, with E in RREF.
inline std::vector<Eigen::Index> reduce_equalities(Eigen::MatrixXd& E, Eigen::VectorXd& e) {
  std::vector<Eigen::Index> pivots;
  Eigen::Index row = 0;
  const Eigen::Index cols = E.cols();
  for (Eigen::Index r = 0; r < E.rows(); ++r) {
    // move candidate row r into position `row`
    if (r != row) {
      E.row(row) = E.row(r);
      e(row) = e(r);
    }
    const double scale = std::max(1.0, E.row(row).cwiseAbs().maxCoeff());
    // prefer the highest-index (highest-degree) column among near-maximal pivots
    Eigen::Index pc = -1;
    double best = 0.0;
    for (Eigen::Index c = cols - 1; c >= 0; --c) {
      const double a = std::abs(E(row, c));
      if (a > best * 1.5) {
        best = a;
        pc = c;
      }
    }
    if (pc < 0 || best < 1e-10 * scale) {
      if (std::abs(e(row)) > 1e-9 * std::max(1.0, std::abs(e(row))))
        throw std::domain_error("Lasserre relaxation: equality constraints are inconsistent");
      continue;
    }
    const double piv = E(row, pc);
    E.row(row) /= piv;
    e(row) /= piv;
    for (Eigen::Index o = 0; o < row; ++o) {
      const double f = E(o, pc);
      if (f != 0.0) {
        E.row(o) -= f * E.row(row);
        e(o) -= f * e(row);
      }
    }
    for (Eigen::Index o = r + 1; o < E.rows(); ++o) {
      const double f = E(o, pc);
      if (f != 0.0) {
        E.row(o) -= f * E.row(row);
        e(o) -= f * e(row);
      }
    }
    pivots.push_back(pc);
    ++row;
  }
  E.conservativeResize(row, Eigen::NoChange);
  e.conservativeResize(row);
  return pivots;
}

/// Linear form in the full moment vector: sum of (moment index, coefficient).
using LinearForm = std::vector<std::pair<std::size_t, double>>;

}  // namespace detail

/// Order-t moment relaxation of `pop`.
inline MomentRelaxation build_relaxation(const Pop& pop, int order) {
  pop.validate();
  const int t_min = pop.minimal_order();
  if (order < t_min)
    throw std::invalid_argument("build_relaxation: order " + std::to_string(order) +
                                " is below the minimal admissible order " + std::to_string(t_min));
  const std::size_t n = pop.n_vars;
  const int two_t = 2 * order;

  MomentRelaxation rel;
  rel.order = order;
  rel.pop = pop;
  rel.moment_basis = poly::basis(n, two_t);
  const auto n_y = static_cast<Eigen::Index>(rel.moment_basis.size());

  // Linear equalities on y.
  std::vector<detail::LinearForm> eq_rows;
  std::vector<double> eq_rhs;
  eq_rows.push_back({{0, 1.0}});
  eq_rhs.push_back(1.0);
  for (const auto& h : pop.equalities) {
    if (h.is_zero()) continue;
    for (const auto& beta : poly::basis(n, two_t - h.degree())) {
      detail::LinearForm row;
      for (const auto& [gamma, c] : h.terms()) row.emplace_back(poly::monomial_index(beta * gamma, two_t), c);
      eq_rows.push_back(std::move(row));
      eq_rhs.push_back(0.0);
    }
  }
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eq_rows.size()), n_y);
  Eigen::VectorXd e(static_cast<Eigen::Index>(eq_rows.size()));
  for (std::size_t r = 0; r < eq_rows.size(); ++r) {
    for (const auto& [idx, c] : eq_rows[r]) E(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx)) += c;
    e(static_cast<Eigen::Index>(r)) = eq_rhs[r];
  }
  const auto pivots = detail::reduce_equalities(E, e);

  std::vector<int> pivot_row(static_cast<std::size_t>(n_y), -1);
  for (std::size_t r = 0; r < pivots.size(); ++r) pivot_row[static_cast<std::size_t>(pivots[r])] = static_cast<int>(r);
  rel.index_map.assign(static_cast<std::size_t>(n_y), -1);
  std::vector<Eigen::Index> free_cols;
  for (Eigen::Index c = 0; c < n_y; ++c)
    if (pivot_row[static_cast<std::size_t>(c)] < 0) {
      rel.index_map[static_cast<std::size_t>(c)] = static_cast<int>(free_cols.size());
      free_cols.push_back(c);
    }
  const auto n_free = static_cast<Eigen::Index>(free_cols.size());
  if (n_free == 0) throw std::domain_error("build_relaxation: equalities determine every moment");

  rel.offset = Eigen::VectorXd::Zero(n_y);
  rel.map = Eigen::MatrixXd::Zero(n_y, n_free);
  for (Eigen::Index j = 0; j < n_free; ++j) rel.map(free_cols[static_cast<std::size_t>(j)], j) = 1.0;
  for (std::size_t r = 0; r < pivots.size(); ++r) {
    const auto pr = static_cast<Eigen::Index>(r);
    rel.offset(pivots[r]) = e(pr);
    for (Eigen::Index j = 0; j < n_free; ++j) {
      const double v = E(pr, free_cols[static_cast<std::size_t>(j)]);
      if (std::abs(v) > 1e-15) rel.map(pivots[r], j) = -v;
    }
  }
  // sparse view of each map row
  std::vector<std::vector<std::pair<Eigen::Index, double>>> map_rows(static_cast<std::size_t>(n_y));
  for (Eigen::Index a = 0; a < n_y; ++a)
    for (Eigen::Index j = 0; j < n_free; ++j)
      if (rel.map(a, j) != 0.0) map_rows[static_cast<std::size_t>(a)].emplace_back(j, rel.map(a, j));

  // Blocks: moment matrix, then one localizing matrix per inequality.
  struct BlockSpec {
    std::vector<Monomial> rows;
    Polynomial weight;
  };
  std::vector<BlockSpec> specs;
  specs.push_back({poly::basis(n, order), Polynomial::constant(n, 1.0)});
  for (const auto& g : pop.inequalities) {
    const int dg = (g.degree() + 1) / 2;
    specs.push_back({poly::basis(n, order - dg), g});
  }
  rel.moment_block_dim = specs.front().rows.size();

  // Every equality h gives kernel vectors h*x^a of each block; restricting the
  // block to their orthogonal complement restores a strictly feasible moment side.
  std::vector<Eigen::MatrixXd> face;
  std::vector<std::size_t> kept;
  for (std::size_t b = 0; b < specs.size(); ++b) {
    const auto& sp = specs[b];
    const auto d = static_cast<Eigen::Index>(sp.rows.size());
    const int s_ord = sp.rows.back().degree();
    std::vector<Eigen::VectorXd> kernel;
    for (const auto& h : pop.equalities) {
      if (h.is_zero()) continue;
      const int room = std::min(s_ord, two_t - sp.weight.degree() - s_ord) - h.degree();
      if (room < 0) continue;
      for (const auto& a : poly::basis(n, room)) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
        for (const auto& [gamma, c] : h.terms()) v(static_cast<Eigen::Index>(poly::monomial_index(a * gamma, s_ord))) += c;
        kernel.push_back(std::move(v));
      }
    }
    if (kernel.empty()) {
      face.emplace_back();
      kept.push_back(b);
      continue;
    }
    Eigen::MatrixXd K(d, static_cast<Eigen::Index>(kernel.size()));
    for (std::size_t i = 0; i < kernel.size(); ++i) K.col(static_cast<Eigen::Index>(i)) = kernel[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-10 * sv(0)) ++rank;
    if (rank == d) continue;  // block vanishes on the face
    face.push_back(svd.matrixU().rightCols(d - rank));
    kept.push_back(b);
  }

  auto& P = rel.sdp;
  const std::size_t nb = kept.size();
  for (std::size_t k = 0; k < nb; ++k)
    P.block_dims.push_back(static_cast<int>(face[k].size() ? face[k].cols() : specs[kept[k]].rows.size()));
  P.objective.reserve(nb);
  auto restrict = [&face](std::size_t k, const sdp::SymBlock& m) {
    if (!face[k].size()) return m;
    Eigen::MatrixXd r = face[k].transpose() * m.matrix() * face[k];
    const double cut = 1e-13 * std::max(1.0, r.cwiseAbs().maxCoeff());
    r = r.unaryExpr([cut](double v) { return std::abs(v) < cut ? 0.0 : v; });
    return sdp::SymBlock(r);
  };
  // per-variable lazily-allocated blocks of A_j
  std::vector<std::vector<std::optional<sdp::SymBlock>>> A(static_cast<std::size_t>(n_free),
                                                            std::vector<std::optional<sdp::SymBlock>>(nb));
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& s = specs[kept[k]];
    const int d = static_cast<int>(s.rows.size());
    sdp::SymBlock C(d);
    for (int r = 0; r < d; ++r)
      for (int c = r; c < d; ++c) {
        const Monomial rc = s.rows[static_cast<std::size_t>(r)] * s.rows[static_cast<std::size_t>(c)];
        // entry = sum_gamma g_gamma y_{rc + gamma} = C - sum_j y_j A_j
        for (const auto& [gamma, gc] : s.weight.terms()) {
          const auto idx = poly::monomial_index(rc * gamma, two_t);
          const double cst = gc * rel.offset(static_cast<Eigen::Index>(idx));
          if (cst != 0.0) C.add(r, c, cst);
          for (const auto& [j, mv] : map_rows[idx]) {
            auto& blk = A[static_cast<std::size_t>(j)][k];
            if (!blk) blk.emplace(d);
            blk->add(r, c, -gc * mv);
          }
        }
      }
    P.objective.push_back(restrict(k, C));
    for (auto& row : A)
      if (row[k]) row[k] = restrict(k, *row[k]);
  }

  // Objective: f'y = f'offset + (f' map) y_free.
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n_y);
  for (const auto& [m, c] : pop.objective.terms()) f(static_cast<Eigen::Index>(poly::monomial_index(m, two_t))) += c;
  rel.objective_constant = f.dot(rel.offset);
  const Eigen::VectorXd fm = rel.map.transpose() * f;
  const double sign = pop.sense == Sense::Min ? -1.0 : 1.0;

  P.constraints.resize(static_cast<std::size_t>(n_free));
  for (Eigen::Index j = 0; j < n_free; ++j) {
    auto& con = P.constraints[static_cast<std::size_t>(j)];
    con.rhs = sign * fm(j);
    for (std::size_t b = 0; b < nb; ++b)
      if (auto& blk = A[static_cast<std::size_t>(j)][b]; blk && !blk->is_zero())
        con.blocks.push_back({b, std::move(*blk)});
  }
  return rel;
}

/// Degree-1 moments as the candidate point, plus (rank M_t, rank M_{t-1}).
inline std::pair<std::vector<double>, std::pair<int, int>> extract_point(const sdp::SdpSolution& sol,
                                                                          const MomentRelaxation& rel,
                                                                          double rank_tol = 1e-6) {
  const Eigen::VectorXd y = rel.full_moments(sol.y);
  const std::size_t n = rel.pop.n_vars;
  std::vector<double> point(n);
  for (std::size_t i = 0; i < n; ++i) point[i] = y(static_cast<Eigen::Index>(1 + i));

  const auto rows = poly::basis(n, rel.order);
  const auto dim = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd M(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = r; c < dim; ++c)
      M(r, c) = M(c, r) =
          y(static_cast<Eigen::Index>(poly::monomial_index(rows[static_cast<std::size_t>(r)] * rows[static_cast<std::size_t>(c)], 2 * rel.order)));
  auto rank = [rank_tol](const Eigen::MatrixXd& A) {
    const Eigen::VectorXd s = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .cwiseAbs();
    const double top = s.maxCoeff();
    if (top <= 0) return 0;
    return static_cast<int>((s.array() > rank_tol * top).count());
  };
  const auto prev = static_cast<Eigen::Index>(poly::basis_size(n, rel.order - 1));
  return {point, {rank(M), rank(M.topLeftCorner(prev, prev))}};
}

/// Global-optimality certificate: flat moment matrix, feasible candidate,
/// and candidate objective equal to the bound.
inline bool certify(const PopResult& result, const Pop& pop, double feas_tol = 1e-6, double cert_tol = 1e-6) {
  if (result.solver_status != sdp::Status::Optimal || !result.bound_usable || !result.point) return false;
  if (result.flatness_ranks.first != result.flatness_ranks.second) return false;
  const auto& x = *result.point;
  // residuals relative to the size of the terms that produce them
  auto term_scale = [&x](const Polynomial& p) {
    double s = 1.0;
    for (const auto& [m, c] : p.terms()) s += std::abs(c * m.eval(x));
    return s;
  };
  for (const auto& g : pop.inequalities)
    if (g.eval(x) < -feas_tol * term_scale(g)) return false;
  for (const auto& h : pop.equalities)
    if (std::abs(h.eval(x)) > feas_tol * term_scale(h)) return false;
  return std::abs(pop.objective.eval(x) - result.bound) <= cert_tol * (1.0 + std::abs(result.bound));
}

namespace detail {

struct Scaling {
  std::vector<double> shift, scale;
  bool active = false;

  static Scaling from(const PopOptions& o, std::size_t n) {
    Scaling s;
    if (o.scale_lower.empty() && o.scale_upper.empty()) return s;
    if (o.scale_lower.size() != n || o.scale_upper.size() != n)
      throw std::invalid_argument("PopOptions: scaling bounds must have one entry per variable");
    s.active = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(o.scale_lower[i] <= o.scale_upper[i]) || !std::isfinite(o.scale_lower[i]) || !std::isfinite(o.scale_upper[i]))
        throw std::invalid_argument("PopOptions: invalid scaling bounds for variable " + std::to_string(i));
      s.shift.push_back(0.5 * (o.scale_lower[i] + o.scale_upper[i]));
      const double h = 0.5 * (o.scale_upper[i] - o.scale_lower[i]);
      s.scale.push_back(h > 1e-12 ? h : 1.0);
    }
    return s;
  }

  Pop apply(const Pop& p) const {
    if (!active) return p;
    Pop q = p;
    q.objective = poly::affine_substitute(p.objective, shift, scale);
    for (auto& g : q.inequalities) g = poly::affine_substitute(g, shift, scale);
    for (auto& h : q.equalities) h = poly::affine_substitute(h, shift, scale);
    // Redundant on the box; bounds every moment of the relaxation.
    Polynomial ball = Polynomial::constant(p.n_vars, static_cast<double>(p.n_vars));
    for (std::size_t i = 0; i < p.n_vars; ++i) ball.add_term(Monomial::unit(p.n_vars, i) * Monomial::unit(p.n_vars, i), -1.0);
    q.inequalities.push_back(std::move(ball));
    return q;
  }

  std::vector<double> unscale(std::vector<double> x) const {
    if (active)
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = shift[i] + scale[i] * x[i];
    return x;
  }
};

}  // namespace detail

namespace detail {

/// Objective coefficients over the free SDP coordinates, f' map.
inline Eigen::VectorXd reduced_objective(const MomentRelaxation& rel, const Polynomial& f) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(rel.offset.size());
  for (const auto& [m, c] : f.terms()) full(static_cast<Eigen::Index>(poly::monomial_index(m, 2 * rel.order))) += c;
  return rel.map.transpose() * full;
}

/// Re-solves over the (slightly relaxed) optimal face, minimizing trace M_t(y).
/// Interior-point methods return maximum-rank points of the optimal face;
/// the trace objective pulls toward low-rank (ideally flat) moment matrices.
inline sdp::SdpSolution refine_low_rank(const MomentRelaxation& rel, double value, const sdp::SolverOptions& opts) {
  sdp::SdpProblem P = rel.sdp;
  P.constraints.clear();
  const std::size_t n = rel.pop.n_vars;
  const auto rows = poly::basis(n, rel.order);
  Polynomial trace(n);
  for (const auto& m : rows) trace.add_term(m * m, 1.0);
  // fixed tilt on the first moments, to pick one vertex when the optimal face
  // is a mixture of several minimizers
  std::mt19937_64 tilt_rng(0x5eed);
  std::uniform_real_distribution<double> tilt(-0.05, 0.05);
  for (std::size_t i = 0; i < n; ++i) trace.add_term(Monomial::unit(n, i), tilt(tilt_rng));
  const Eigen::VectorXd tm = reduced_objective(rel, trace);
  const Eigen::VectorXd fm = reduced_objective(rel, rel.pop.objective);
  const double slack = 1e-7 * (1.0 + std::abs(value));
  // Min: value + slack - f'y >= 0.  Max: f'y - (value - slack) >= 0.
  const double s = rel.pop.sense == Sense::Min ? 1.0 : -1.0;
  const std::size_t cut = P.block_dims.size();
  P.block_dims.push_back(1);
  sdp::SymBlock c0(1);
  c0.set(0, 0, s * (value - rel.objective_constant) + slack);
  P.objective.push_back(c0);
  P.constraints = rel.sdp.constraints;
  for (std::size_t j = 0; j < P.constraints.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    P.constraints[j].rhs = -tm(jj);
    if (fm(jj) != 0.0) {
      sdp::SymBlock a(1);
      a.set(0, 0, s * fm(jj));
      P.constraints[j].blocks.push_back({cut, a});
    }
  }
  sdp::SolverOptions o = opts;
  o.dump_path.clear();
  return sdp::sdp_solve(P, o);
}

}  // namespace detail

/// Solves the order-t relaxation. The bound is a lower bound (Min) or upper
/// bound (Max) on the POP value whenever the solve is Optimal.
inline PopResult pop_bound(const Pop& pop, int order, const PopOptions& opts = {}) {
  pop.validate();
  const auto scaling = detail::Scaling::from(opts, pop.n_vars);
  const Pop scaled = scaling.apply(pop);
  const MomentRelaxation rel = build_relaxation(scaled, order);
  const sdp::SdpSolution sol = sdp::sdp_solve(rel.sdp, opts.solver);

  PopResult r;
  r.order_used = order;
  r.solver_status = sol.status;
  r.iterations = sol.iterations;
  if (sol.status != sdp::Status::Optimal) return r;

  // The primal (SOS) objective is the conservative side of the duality gap.
  const double sign = pop.sense == Sense::Min ? -1.0 : 1.0;
  r.bound = rel.objective_constant + sign * sol.primal_obj;
  r.bound_usable = true;
  auto [pt, ranks] = extract_point(sol, rel, opts.rank_tol);
  r.point = scaling.unscale(std::move(pt));
  r.flatness_ranks = ranks;
  r.certified = certify(r, pop, opts.feas_tol, opts.cert_tol);
  if (!r.certified && opts.refine) {
    const double value = rel.objective_constant + sign * sol.dual_obj;
    const sdp::SdpSolution low = detail::refine_low_rank(rel, value, opts.solver);
    if (low.status == sdp::Status::Optimal) {
      PopResult alt = r;
      auto [pt2, ranks2] = extract_point(low, rel, opts.rank_tol);
      alt.point = scaling.unscale(std::move(pt2));
      alt.flatness_ranks = ranks2;
      alt.certified = certify(alt, pop, opts.feas_tol, opts.cert_tol);
      if (alt.certified) r = std::move(alt);
    }
  }
  return r;
}

}  // namespace robust_ut::lasserre
