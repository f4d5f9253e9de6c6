#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"

using namespace hlab;
using namespace hlab::testing;

namespace {

Vector probability(int n, std::uint64_t seed) {
  const Vector w = random_vector(n, seed, 0, 0.1, 1.0);
  return w / w.sum();
}

std::vector<YoungFunction> continuous_kinds() {
  return {YoungFunction::power(1.0), YoungFunction::power(1.5), YoungFunction::power(2.0), YoungFunction::power(3.0),
          YoungFunction::theta_exp(), YoungFunction::theta_star_llogl()};
}

}  // namespace

TEST(YoungFunctionTest, Values) {
  EXPECT_DOUBLE_EQ(YoungFunction::power(2.0)(3.0), 4.5);
  EXPECT_DOUBLE_EQ(young_eval(YoungFunction::power(2.0), -3.0), 4.5);
  for (const YoungFunction& g : continuous_kinds()) EXPECT_EQ(g(0.0), 0.0) << g.name();
  EXPECT_EQ(YoungFunction::sup_norm()(0.0), 0.0);
  EXPECT_EQ(YoungFunction::sup_norm()(1.0), 0.0);
  EXPECT_TRUE(std::isinf(YoungFunction::sup_norm()(1.01)));
  EXPECT_NEAR(YoungFunction::theta_exp()(1.0), std::exp(1.0) - 2.0, 1e-15);
  EXPECT_THROW(YoungFunction::power(0.5), Error);
}

TEST(YoungFunctionTest, ConjugatePairs) {
  EXPECT_EQ(conjugate(YoungFunction::theta_exp()), YoungFunction::theta_star_llogl());
  EXPECT_EQ(conjugate(YoungFunction::power(1.0)), YoungFunction::sup_norm());
  EXPECT_EQ(conjugate(YoungFunction::sup_norm()), YoungFunction::power(1.0));
  EXPECT_DOUBLE_EQ(conjugate(YoungFunction::power(3.0)).exponent(), 1.5);
  EXPECT_DOUBLE_EQ(conjugate(YoungFunction::power(2.0)).exponent(), 2.0);
}

TEST(YoungFunctionTest, InvolutionPointwise) {
  for (const YoungFunction& g : continuous_kinds()) {
    if (g.kind() == YoungFunction::Kind::power && g.exponent() == 1.0) continue;
    const YoungFunction back = conjugate(conjugate(g));
    for (int i = 0; i <= 60; ++i) {
      const double a = 0.05 * i;
      EXPECT_NEAR(back(a), g(a), 1e-12 * std::max(1.0, g(a))) << g.name();
    }
  }
}

TEST(YoungFunctionTest, FenchelPairs) {
  const YoungFunction theta = YoungFunction::theta_exp(), star = conjugate(theta);
  for (int i = 0; i <= 60; ++i) {
    const double a = 0.05 * i, b = std::expm1(a);
    EXPECT_NEAR(theta(a) + star(b), a * b, 1e-12 * std::max(1.0, a * b));
  }
  const YoungFunction p3 = YoungFunction::power(3.0), q = conjugate(p3);
  for (int i = 0; i <= 40; ++i) {
    const double a = 0.1 * i;
    for (int j = 0; j <= 40; ++j) EXPECT_LE(a * 0.1 * j, p3(a) + q(0.1 * j) + 1e-12);
    // equality at b = a^{p-1}
    EXPECT_NEAR(p3(a) + q(a * a), a * a * a, 1e-12 * std::max(1.0, a * a * a));
  }
}

TEST(YoungFunctionTest, DeltaTwo) {
  EXPECT_TRUE(YoungFunction::power(2.0).satisfies_delta2());
  EXPECT_TRUE(YoungFunction::theta_star_llogl().satisfies_delta2());
  EXPECT_FALSE(YoungFunction::theta_exp().satisfies_delta2());
}

TEST(LuxemburgNormTest, Examples) {
  const Vector m = probability(6, 1);
  const Vector u = random_vector(6, 2, 0, -3.0, 3.0);
  for (const YoungFunction& g : continuous_kinds()) EXPECT_EQ(luxemburg_norm(Vector::Zero(6), m, g), 0.0);
  EXPECT_NEAR(luxemburg_norm(u, m, YoungFunction::power(1.0)), m.dot(u.cwiseAbs()), 1e-9);
  EXPECT_EQ(luxemburg_norm(u, m, YoungFunction::sup_norm()), u.cwiseAbs().maxCoeff());
  // power(p): ‖u‖ = (p^{-1} ∫|u|^p)^{1/p}... solved from ∫|u|^p/(p α^p) = 1
  const double p = 2.0;
  const double closed = std::pow(m.dot(u.cwiseAbs().array().pow(p).matrix()) / p, 1.0 / p);
  EXPECT_NEAR(luxemburg_norm(u, m, YoungFunction::power(p)), closed, 1e-9 * closed);
  EXPECT_THROW(luxemburg_norm(u, probability(5, 1), YoungFunction::power(2.0)), Error);
}

TEST(LuxemburgNormTest, HomogeneityAndUnitProperty) {
  const Vector m = probability(7, 3);
  for (const YoungFunction& g : continuous_kinds()) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      const Vector u = random_vector(7, 4, i, -2.0, 2.0);
      const double norm = luxemburg_norm(u, m, g);
      for (double c : {-3.0, 0.25, 7.0})
        EXPECT_NEAR(luxemburg_norm(c * u, m, g), std::abs(c) * norm, 1e-9 * std::abs(c) * norm) << g.name();
      const double mod = modular(u, m, g, norm);
      EXPECT_LE(mod, 1.0) << g.name();
      EXPECT_GE(mod, 1.0 - 1e-8) << g.name();
    }
  }
}

TEST(HolderCheckTest, ZeroAndRandomPairs) {
  const Vector m = probability(8, 5);
  const HolderCheck zero = holder_check(Vector::Zero(8), random_vector(8, 6, 0), m, YoungFunction::power(2.0));
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs, 0.0);
  EXPECT_TRUE(zero.satisfied);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Vector u = random_vector(8, 7, 2 * i, -2.0, 2.0), v = random_vector(8, 7, 2 * i + 1, -2.0, 2.0);
    for (double p : {1.5, 2.0, 3.0}) {
      const HolderCheck h = holder_check(u, v, m, YoungFunction::power(p));
      EXPECT_TRUE(h.satisfied);
      // informational: classical Hölder, whose constant p^{1/p} q^{1/q} is below 2
      EXPECT_TRUE(h.classical_satisfied) << "p=" << p;
      EXPECT_LE(h.classical_rhs, h.rhs * (1 + 1e-15));  // equal at p = 2
      const double lp = std::pow(m.dot(u.cwiseAbs().array().pow(p).matrix()), 1.0 / p);
      const double q = p / (p - 1.0);
      const double lq = std::pow(m.dot(v.cwiseAbs().array().pow(q).matrix()), 1.0 / q);
      EXPECT_NEAR(h.classical_rhs, lp * lq, 1e-8 * lp * lq);
    }
    const HolderCheck th = holder_check(u, v, m, YoungFunction::theta_exp());
    EXPECT_TRUE(th.satisfied);
    EXPECT_TRUE(std::isnan(th.classical_rhs));
    EXPECT_TRUE(holder_check(u, v, m, YoungFunction::power(1.0)).satisfied);
  }
}

TEST(HypothesisReportTest, Examples) {
  const TimeGrid grid(20);
  const Vector m = probability(4, 9);
  const PotentialField V = PotentialField::sampled(grid, 4, [](double t, int x) { return x - 3.0 * (1.0 - t); });
  const HypothesisReport r = hypothesis_report(Vector::Ones(4), Vector::Ones(4), V, m, YoungFunction::theta_star_llogl());
  EXPECT_EQ(r.potential_lower_bound, 3.0);
  EXPECT_TRUE(r.bounded_below);
  EXPECT_NE(r.verdicts.front().find("bounded below: yes"), std::string::npos);
  EXPECT_NEAR(r.gamma1_modular, theta_star(1.0), 1e-15);
  EXPECT_EQ(r.f0_entropy_integral, 0.0);
  EXPECT_TRUE(r.satisfied);
  EXPECT_EQ(r.verdicts.back(), "satisfied (finite space)");
  EXPECT_TRUE(r.g_norm_ratio.empty());
}

TEST(HypothesisReportTest, NormRatiosAlongG) {
  const ReversibleModel model = five_state_model();
  const TimeGrid grid(50);
  const PotentialField V = five_state_potential(grid);
  const Vector gamma = vec({1.0, 0.5, 2.0, 1.0, 1.5});
  const Matrix g = solve_g(model, V, gamma);
  const HypothesisReport r =
      hypothesis_report(vec({1.0, 2.0, 0.5, 1.5, 1.0}), gamma, V, model.measure(), YoungFunction::power(2.0), 2.0, &g);
  ASSERT_EQ(r.g_norm_ratio.size(), 51u);
  EXPECT_NEAR(r.g_norm_ratio.back(), 1.0, 1e-9);
  EXPECT_GT(r.f0_entropy_integral, 0.0);
  EXPECT_GT(r.sup_conjugate_potential, 0.0);
  EXPECT_TRUE(r.satisfied);
}
