#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "elbsde/driver.hpp"
#include "elbsde/hedge.hpp"
#include "support.hpp"

using namespace elbsde;

TEST(Benefits, Payoffs) {
  ModelParams p;
  const auto b = benefits(0.0, 1.0, p);
  EXPECT_NEAR(b.death, 0.02, 1e-15);
  EXPECT_NEAR(b.survival, 0.02, 1e-15);
  EXPECT_EQ(benefits(0.0, 1.02, p).death, 0.0);
  EXPECT_EQ(benefits(0.0, 1.5, p).survival, 0.0);
  EXPECT_DOUBLE_EQ(benefits(0.0, 0.0, p).survival, 1.02);
  for (double f = 0.0; f < 2.0; f += 0.01) {
    const auto lo = benefits(0.0, f, p), hi = benefits(0.0, f + 0.01, p);
    EXPECT_GE(lo.death, hi.death);
    EXPECT_LE(lo.death - hi.death, 0.01 + 1e-15);
  }
}

TEST(CorrWeights, Collapse) {
  ModelParams p;
  p.corr = Matrix5::Identity();
  const auto bc = bond_coefficients(0.0, p);
  const auto w = corr_weights(0.0, p);
  EXPECT_DOUBLE_EQ(w.rho_x, bc.A);
  EXPECT_DOUBLE_EQ(w.rho_y, bc.B);
  EXPECT_EQ(w.rho_v, 0.0);

  p = {};
  p.corr(0, 3) = p.corr(3, 0) = 0.0;
  p.corr(1, 3) = p.corr(3, 1) = 0.0;
  p.corr(2, 3) = p.corr(3, 2) = 0.0;
  EXPECT_EQ(corr_weights(0.0, p).rho_v, 0.0);
}

TEST(CorrWeights, BaseValues) {
  ModelParams p;
  const auto w = corr_weights(0.0, p);
  // independent evaluation at 30 digits
  EXPECT_NEAR(w.rho_x, -0.00338079, 1e-8);
  EXPECT_NEAR(w.rho_y, -0.00873615, 1e-8);
  EXPECT_NEAR(w.rho_v, -0.00139977, 1e-8);
}

TEST(OptimalHedge, Examples) {
  ModelParams p;
  State s;
  s.f = 1.3;
  const auto zero = optimal_hedge(0.2, s, Gradient5{}, p);
  EXPECT_EQ(zero.theta1, 0.0);
  EXPECT_EQ(zero.theta2, 0.0);
  const auto h = optimal_hedge(0.2, s, Gradient5{0, 0, 1, 0, 0}, p);
  EXPECT_NEAR(h.theta1, p.u * s.f, 1e-15);
  EXPECT_NEAR(h.theta2, (1 - p.u) * s.f, 1e-15);
}

TEST(OptimalHedge, Errors) {
  ModelParams p;
  State s;
  s.v = 1e-12;
  EXPECT_THROW(optimal_hedge(0.0, s, Gradient5{}, p), VanishingVariance);
  EXPECT_THROW(hedge_coefficients(p.T_star, State{}, p), DegenerateHedgeBasis);
}

// Both partial derivatives of the local variance vanish at the optimum.
TEST(OptimalHedge, FirstOrderConditions) {
  ModelParams p;
  std::mt19937_64 eng(17);
  const double h = 1e-5;
  for (int i = 0; i < 1000; ++i) {
    const double t = testutil::random_time(eng);
    const State s = testutil::random_state(eng);
    const Gradient5 g = testutil::random_gradient(eng);
    const HedgePosition opt = optimal_hedge(t, s, g, p);
    auto lv = [&](double d1, double d2) {
      return local_variance(t, s, g, {opt.theta1 + d1, opt.theta2 + d2}, p);
    };
    const double d1 = (lv(h, 0) - lv(-h, 0)) / (2 * h);
    const double d2 = (lv(0, h) - lv(0, -h)) / (2 * h);
    ASSERT_LT(std::abs(d1), 1e-6);
    ASSERT_LT(std::abs(d2), 1e-6);
  }
}

TEST(LocalVariance, ConvexAroundOptimum) {
  ModelParams p;
  std::mt19937_64 eng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  const double t = 0.4;
  const State s = testutil::random_state(eng);
  const Gradient5 g = testutil::random_gradient(eng);
  const HedgePosition opt = optimal_hedge(t, s, g, p);
  const double best = local_variance(t, s, g, opt, p);
  EXPECT_GE(best, 0.0);
  EXPECT_EQ(local_variance(t, s, Gradient5{}, HedgePosition{}, p), 0.0);
  for (int i = 0; i < 100; ++i) {
    const HedgePosition e{opt.theta1 + n(eng), opt.theta2 + n(eng)};
    EXPECT_GE(local_variance(t, s, g, e, p), best);
  }
}

TEST(Driver, Examples) {
  ModelParams p;
  State s;
  s.f = 1.5;  // no death benefit
  EXPECT_NEAR(driver_upsilon(0.0, s, 6.0, 6.1, Gradient5{}, p), 0.1 * std::sqrt(0.01 * 100 * 0.015), 1e-15);
  EXPECT_NEAR(driver_upsilon(0.0, s, 6.0, 6.1, Gradient5{}, p), 0.012247448713915891, 1e-15);

  ModelParams p0 = p;
  p0.alpha = 0.0;
  std::mt19937_64 eng(1);
  EXPECT_EQ(driver_upsilon(0.0, s, 6.0, 5.0, testutil::random_gradient(eng), p0), 0.0);

  s.lam = 0.0;
  EXPECT_EQ(driver_upsilon(0.0, s, 6.0, 5.0, Gradient5{}, p), 0.0);
}

TEST(Driver, EmptyPortfolioDropsJump) {
  ModelParams p;
  State s;
  s.k = 0;
  EXPECT_EQ(driver_upsilon(0.0, s, 6.0, 100.0, Gradient5{}, p), 0.0);
}

TEST(Driver, HomogeneousInAlpha) {
  ModelParams p;
  std::mt19937_64 eng(29);
  for (int i = 0; i < 50; ++i) {
    const double t = testutil::random_time(eng);
    const State s = testutil::random_state(eng);
    const Gradient5 g = testutil::random_gradient(eng);
    p.alpha = 0.1;
    const double u1 = driver_upsilon(t, s, 6.0, 5.9, g, p);
    p.alpha = 0.35;
    const double u2 = driver_upsilon(t, s, 6.0, 5.9, g, p);
    EXPECT_GE(u1, 0.0);
    EXPECT_NEAR(u2, 3.5 * u1, 1e-12 * (1 + u2));
  }
}
