#include "robust_ut/lasserre.hpp"
#include "robust_ut/momentset.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace robust_ut;
using lasserre::Pop;
using lasserre::PopOptions;
using lasserre::Sense;
using poly::Monomial;
using poly::Polynomial;

namespace {

Polynomial var(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }

// Random polynomial of degree <= deg with coefficients in [-1, 1].
Polynomial random_poly(std::mt19937_64& rng, std::size_t n, int deg) {
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  Polynomial p(n);
  for (const auto& m : poly::basis(n, deg)) p.add_term(m, c(rng));
  return p;
}

Pop box_pop(const Polynomial& f, std::size_t n) {
  Pop p{f, Sense::Min, {}, {}, n};
  for (std::size_t i = 0; i < n; ++i) p.inequalities.push_back(1.0 - var(n, i) * var(n, i));
  return p;
}

// Minimum of f over the grid of [-1, 1]^n with the given number of steps per axis.
double grid_min(const Polynomial& f, std::size_t n, int steps) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(n, 0);
  std::vector<double> x(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) x[i] = -1.0 + 2.0 * idx[i] / steps;
    best = std::min(best, f.eval(x));
    std::size_t i = 0;
    while (i < n && ++idx[i] > steps) idx[i++] = 0;
    if (i == n) break;
  }
  return best;
}

MomentSpec reference_spec() {
  MomentSpec s;
  s.n_sigma = 2;
  s.epsilon = 0.01;
  s.intervals = {{1, {-3.0, 4.0}}, {2, {0.0, 5.0}}};
  return s;
}

PopOptions scaled_by(const Box& b) {
  PopOptions o;
  o.scale_lower = b.lower;
  o.scale_upper = b.upper;
  return o;
}

}  // namespace

TEST(PopBound, SquareIsSosExact) {
  const Pop p{var(1, 0) * var(1, 0), Sense::Min, {}, {}, 1};
  const auto r = lasserre::pop_bound(p, 1);
  ASSERT_TRUE(r.bound_usable);
  EXPECT_NEAR(r.bound, 0.0, 1e-6);
  EXPECT_TRUE(r.certified);
}

TEST(PopBound, LinearOverInterval) {
  const auto x = var(1, 0);
  const Pop p{x, Sense::Min, {x, 1.0 - x}, {}, 1};
  const auto r = lasserre::pop_bound(p, 1);
  EXPECT_NEAR(r.bound, 0.0, 1e-6);
  ASSERT_TRUE(r.point);
  EXPECT_NEAR((*r.point)[0], 0.0, 1e-5);
  EXPECT_TRUE(r.certified);
}

TEST(PopBound, BilinearOnSquareMatchesGrid) {
  const auto f = var(2, 0) * var(2, 1);
  const auto r = lasserre::pop_bound(box_pop(f, 2), 2);
  const double brute = grid_min(f, 2, 2000);
  EXPECT_NEAR(r.bound, brute, 1e-6);
  EXPECT_NEAR(r.bound, -1.0, 1e-6);
  ASSERT_TRUE(r.certified);
  EXPECT_NEAR(std::abs((*r.point)[0]), 1.0, 1e-4);
  EXPECT_NEAR((*r.point)[0], -(*r.point)[1], 1e-4);
}

TEST(PopBound, MaximizationReportsUpperBound) {
  const auto x = var(1, 0);
  const Pop p{x * (1.0 - x), Sense::Max, {x, 1.0 - x}, {}, 1};
  const auto r = lasserre::pop_bound(p, 1);
  EXPECT_NEAR(r.bound, 0.25, 1e-6);
  EXPECT_TRUE(r.certified);
}

TEST(PopBound, ConstantObjective) {
  const auto x = var(2, 0);
  const Pop p{Polynomial::constant(2, 0.0), Sense::Min, {1.0 - x * x}, {}, 2};
  const auto r = lasserre::pop_bound(p, 1);
  EXPECT_NEAR(r.bound, 0.0, 1e-6);
  EXPECT_TRUE(r.certified);
}

TEST(PopBound, OrderBelowMinimumNamesIt) {
  const auto x = var(1, 0);
  const Pop p{x * x * x * x, Sense::Min, {}, {}, 1};
  try {
    lasserre::pop_bound(p, 1);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("minimal admissible order 2"), std::string::npos) << e.what();
  }
}

TEST(BuildRelaxation, MomentBlockDimension) {
  for (std::size_t n = 1; n <= 3; ++n)
    for (int t = 1; t <= 3; ++t) {
      const auto rel = lasserre::build_relaxation(box_pop(var(n, 0), n), t);
      EXPECT_EQ(rel.moment_block_dim, poly::binomial(static_cast<int>(n) + t, t));
      EXPECT_EQ(rel.moment_basis.size(), poly::basis_size(n, 2 * t));
    }
}

TEST(ExtractPoint, ConcentratesOnUniqueMinimizer) {
  const auto x = var(1, 0);
  const Pop p{(x - 3.0) * (x - 3.0), Sense::Min, {}, {}, 1};
  const auto r = lasserre::pop_bound(p, 1);
  ASSERT_TRUE(r.point);
  EXPECT_NEAR((*r.point)[0], 3.0, 1e-4);
}

TEST(ExtractPoint, AxesWithProductEquality) {
  // brute force on the two lines x = 0 and y = 0
  const auto x = var(2, 0), y = var(2, 1);
  const auto f = x * x + (y - 1.0) * (y - 1.0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_pt;
  for (int k = -3000; k <= 3000; ++k) {
    const double t = k * 1e-3;
    for (const std::vector<double>& pt : {std::vector<double>{0.0, t}, std::vector<double>{t, 0.0}})
      if (f.eval(pt) < best) {
        best = f.eval(pt);
        best_pt = pt;
      }
  }
  const Pop p{f, Sense::Min, {}, {x * y}, 2};
  const auto r = lasserre::pop_bound(p, 2);
  EXPECT_NEAR(r.bound, best, 1e-5);
  ASSERT_TRUE(r.point);
  EXPECT_NEAR((*r.point)[0], best_pt[0], 1e-3);
  EXPECT_NEAR((*r.point)[1], best_pt[1], 1e-3);
  EXPECT_TRUE(r.certified);
}

TEST(Certify, RequiresOptimalSolve) {
  const auto x = var(1, 0);
  const Pop p{x, Sense::Min, {x, 1.0 - x}, {}, 1};
  PopOptions o;
  o.solver.max_iter = 1;
  const auto r = lasserre::pop_bound(p, 1, o);
  EXPECT_EQ(r.solver_status, sdp::Status::IterLimit);
  EXPECT_FALSE(r.bound_usable);
  EXPECT_FALSE(lasserre::certify(r, p));
}

TEST(Certify, RejectsInfeasibleOrMismatchedPoint) {
  const auto x = var(1, 0);
  const Pop p{x, Sense::Min, {x, 1.0 - x}, {}, 1};
  lasserre::PopResult r;
  r.solver_status = sdp::Status::Optimal;
  r.bound_usable = true;
  r.bound = 0.0;
  r.flatness_ranks = {1, 1};
  r.point = std::vector<double>{0.0};
  EXPECT_TRUE(lasserre::certify(r, p));
  r.point = std::vector<double>{-0.5};
  EXPECT_FALSE(lasserre::certify(r, p));
  r.point = std::vector<double>{0.5};
  EXPECT_FALSE(lasserre::certify(r, p));
  r.point = std::vector<double>{0.0};
  r.flatness_ranks = {2, 1};
  EXPECT_FALSE(lasserre::certify(r, p));
}

TEST(Relaxation, PushForwardOfFeasiblePointIsFeasible) {
  // x1 + x2 = 1, 1 - x1^2 >= 0, x2 >= 0
  const std::size_t n = 2;
  const auto x1 = var(n, 0), x2 = var(n, 1);
  const Pop p{x1 * x2, Sense::Min, {1.0 - x1 * x1, x2}, {x1 + x2 - 1.0}, n};
  for (int t = 1; t <= 3; ++t) {
    const auto rel = lasserre::build_relaxation(p, t);
    for (double a : {-0.9, 0.0, 0.4, 1.0}) {
      const std::vector<double> pt{a, 1.0 - a};
      Eigen::VectorXd y(static_cast<Eigen::Index>(rel.moment_basis.size()));
      for (std::size_t k = 0; k < rel.moment_basis.size(); ++k)
        y(static_cast<Eigen::Index>(k)) = rel.moment_basis[k].eval(pt);
      Eigen::VectorXd y_free(rel.map.cols());
      for (std::size_t k = 0; k < rel.index_map.size(); ++k)
        if (rel.index_map[k] >= 0) y_free(rel.index_map[k]) = y(static_cast<Eigen::Index>(k));
      EXPECT_LE((rel.full_moments(y_free) - y).cwiseAbs().maxCoeff(), 1e-9);
      for (std::size_t b = 0; b < rel.sdp.block_dims.size(); ++b) {
        Eigen::MatrixXd s = rel.sdp.objective[b].matrix();
        for (std::size_t i = 0; i < rel.sdp.constraints.size(); ++i)
          for (const auto& e : rel.sdp.constraints[i].blocks)
            if (e.block == b) s -= y_free(static_cast<Eigen::Index>(i)) * e.matrix.matrix();
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues()(0);
        EXPECT_GE(lmin, -1e-9) << "order " << t << " block " << b << " a " << a;
      }
    }
  }
}

TEST(PopBound, RandomBoxProblemsAreSoundAndMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 1 + trial % 2;
    const auto f = random_poly(rng, n, 4);
    const Pop p = box_pop(f, n);
    const auto r2 = lasserre::pop_bound(p, 2);
    const auto r3 = lasserre::pop_bound(p, 3);
    ASSERT_TRUE(r2.bound_usable && r3.bound_usable) << trial;
    EXPECT_LE(r2.bound, r3.bound + 1e-6) << trial;
    for (int k = 0; k < 500; ++k) {
      std::vector<double> x(n);
      for (auto& c : x) c = u(rng);
      EXPECT_GE(f.eval(x), r2.bound - 1e-6);
    }
    if (r2.certified) EXPECT_NEAR(r2.bound, grid_min(f, n, n == 1 ? 20000 : 400), 1e-4) << trial;
  }
}

TEST(PopBound, ReferenceSpecWeightBound) {
  const auto set = build_set(reference_spec());
  const Pop p{Polynomial::variable(4, 2), Sense::Max, set.inequalities, set.equalities, 4};
  const auto r = lasserre::pop_bound(p, 2, scaled_by(set.prior_box));
  ASSERT_TRUE(r.bound_usable);
  EXPECT_NEAR(r.bound, 0.99, 1e-4);
  EXPECT_TRUE(r.certified);
  const auto samples = sample_set(set, set.prior_box, 300, 5);
  for (const auto& s : samples.points) EXPECT_LE(s[2], r.bound + 1e-9);
}

TEST(PopBound, ReferenceSpecSumIsSymmetric) {
  const auto set = build_set(reference_spec());
  const auto s = Polynomial::variable(4, 0) + Polynomial::variable(4, 1);
  const auto o = scaled_by(set.prior_box);
  const auto lo = lasserre::pop_bound(Pop{s, Sense::Min, set.inequalities, set.equalities, 4}, 2, o);
  const auto hi = lasserre::pop_bound(Pop{s, Sense::Max, set.inequalities, set.equalities, 4}, 2, o);
  ASSERT_TRUE(lo.bound_usable && hi.bound_usable);
  EXPECT_NEAR(lo.bound, -hi.bound, 1e-4 * (1.0 + std::abs(hi.bound)));
  EXPECT_LT(lo.bound, 0.0);
}
