#include "robust_ut/distortion.hpp"
#include "robust_ut/robustut.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace robust_ut;

namespace {

MomentSpec reference_spec() {
  MomentSpec s;
  s.intervals = {{1, {-3.0, 4.0}}, {2, {0.0, 5.0}}};
  return s;
}

}  // namespace

TEST(TestFunction, ParseAndName) {
  for (const char* id : {"sin", "cos", "exp", "identity"}) EXPECT_EQ(TestFunction::parse(id).name(), id);
  const auto p = TestFunction::parse("poly:1,0,2");
  EXPECT_EQ(p.kind(), TestFunction::Kind::Poly);
  EXPECT_EQ(p.coefficients(), (std::vector<double>{1.0, 0.0, 2.0}));
  EXPECT_DOUBLE_EQ(p(3.0), 19.0);
  EXPECT_EQ(TestFunction::parse(p.name()).coefficients(), p.coefficients());
  EXPECT_THROW(TestFunction::parse("tan"), ConfigError);
  EXPECT_THROW(TestFunction::parse("poly:1,x"), ConfigError);
  EXPECT_THROW(TestFunction::parse("poly:"), ConfigError);
  EXPECT_THROW(TestFunction::polynomial({1.0, std::nan("")}), ConfigError);
}

TEST(UtEval, Examples) {
  const SigmaPointSet naive{{2.0, -1.0}, {0.5, 0.5}};
  EXPECT_DOUBLE_EQ(ut_eval(naive, TestFunction(TestFunction::Kind::Identity)), 0.5);
  const auto normal = normal_sigma_points(0.0, 1.0);
  EXPECT_NEAR(ut_eval(normal, TestFunction::polynomial({0.0, 0.0, 1.0})), 1.0, 1e-12);
  EXPECT_NEAR(ut_eval(normal, TestFunction(TestFunction::Kind::Sin)), 0.0, 1e-15);
}

TEST(UtEval, LinearInFunction) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const TestFunction f = TestFunction::polynomial({0.5, -1.0, 0.25, 0.1});
  const TestFunction g = TestFunction::polynomial({-2.0, 0.0, 1.0});
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng);
    const TestFunction h = TestFunction::polynomial({a * 0.5 + b * -2.0, a * -1.0, a * 0.25 + b, a * 0.1});
    SigmaPointSet s{{u(rng), u(rng), u(rng)}, {0.2, 0.3, 0.5}};
    EXPECT_NEAR(ut_eval(s, h), a * ut_eval(s, f) + b * ut_eval(s, g), 1e-12);
  }
}

TEST(UtEval, PowersReproduceMomentConstraints) {
  const auto set = build_set(reference_spec());
  for (const auto& x : sample_set(set, set.prior_box, 300, 8).points) {
    const auto s = SigmaPointSet::decode(x);
    const double m1 = ut_eval(s, TestFunction::polynomial({0.0, 1.0}));
    const double m2 = ut_eval(s, TestFunction::polynomial({0.0, 0.0, 1.0}));
    EXPECT_GE(m1, -3.0 - 1e-9);
    EXPECT_LE(m1, 4.0 + 1e-9);
    EXPECT_GE(m2, -1e-9);
    EXPECT_LE(m2, 5.0 + 1e-9);
  }
  MomentSpec s;
  s.n_sigma = 2;
  s.known = {{1, 0.0}, {2, 1.0}};
  const SigmaPointSet p{{1.0, -1.0}, {0.5, 0.5}};
  ASSERT_TRUE(membership(p.encode(), build_set(s), 1e-12));
  EXPECT_NEAR(ut_eval(p, TestFunction::polynomial({0.0, 0.0, 1.0})), 1.0, 1e-9);
}

TEST(PairDistortion, ClosedFormCases) {
  const TestFunction id(TestFunction::Kind::Identity);
  const std::vector<double> x{1.0, 2.0, 0.5, 0.5};
  EXPECT_FALSE(pair_distortion(x, x, id, 2));
  // swapping nodes keeps the UT value and moves the point by |(1,-1,0,0)| * 1
  const std::vector<double> sw{2.0, 1.0, 0.5, 0.5};
  const auto d = pair_distortion(x, sw, id, 2);
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 1.0, 1e-12);
  // r = 2, s = 3 with UT = 1.5 * z1 on the first node
  const std::vector<double> a{0.0, 0.0, 1.0, 0.0}, b{2.0, 0.0, 1.0, 0.0};
  const auto e = pair_distortion(a, b, TestFunction::polynomial({0.0, 1.5}), 2);
  ASSERT_TRUE(e);
  EXPECT_NEAR(*e, 0.5, 1e-12);
  EXPECT_THROW(pair_distortion(std::vector<double>{0.0, 1.0}, x, id, 2), std::invalid_argument);
}

TEST(EstimateDistortion, ReferenceSpec) {
  const auto set = build_set(reference_spec());
  const auto ob = outer_box(set, 2);
  const auto est = estimate_distortion(set, ob.box, TestFunction(TestFunction::Kind::Sin), 500, 0);
  EXPECT_EQ(est.n_pairs, 500u);
  EXPECT_EQ(est.per_pair.size() + est.skipped, 500u);
  EXPECT_GE(est.d_max, 0.99);
  EXPECT_LE(est.d_max, 1.0);
  EXPECT_EQ(est.d_max, *std::max_element(est.per_pair.begin(), est.per_pair.end()));
}

TEST(EstimateDistortion, Reproducible) {
  const auto set = build_set(reference_spec());
  const TestFunction f(TestFunction::Kind::Cos);
  const auto a = estimate_distortion(set, set.prior_box, f, 100, 7);
  const auto b = estimate_distortion(set, set.prior_box, f, 100, 7);
  EXPECT_EQ(a.d_max, b.d_max);
  EXPECT_EQ(a.per_pair, b.per_pair);
}

TEST(EstimateDistortion, ZeroFunctionGivesOne) {
  const auto set = build_set(reference_spec());
  const auto est = estimate_distortion(set, set.prior_box, TestFunction::polynomial({0.0}), 50, 1);
  EXPECT_DOUBLE_EQ(est.d_max, 1.0);
}

TEST(EstimateDistortion, IdentityBoundedByGradient) {
  // On a convex box the gradient (w, z) of sum w_i z_i bounds s/r, so D <= max(1, L - 1).
  MomentSpec s;
  s.intervals = {{1, {-0.1, 0.1}}, {2, {0.0, 0.005}}};
  const auto set = build_set(s);
  const auto& b = set.prior_box;
  double l2 = 0.0;
  for (std::size_t i = 0; i < b.dim(); ++i) l2 += std::pow(std::max(std::abs(b.lower[i]), std::abs(b.upper[i])), 2);
  const double bound = std::max(1.0, std::sqrt(l2) - 1.0);
  const auto est = estimate_distortion(set, b, TestFunction(TestFunction::Kind::Identity), 300, 2);
  EXPECT_LE(est.d_max, bound + 1e-12);
  EXPECT_LE(est.d_max, 1.0 + 1e-12);
}

TEST(EstimateDistortion, RejectsZeroPairs) {
  const auto set = build_set(reference_spec());
  EXPECT_THROW(estimate_distortion(set, set.prior_box, TestFunction(), 0, 0), ConfigError);
}
