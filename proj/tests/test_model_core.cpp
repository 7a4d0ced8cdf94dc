#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "elbsde/model_core.hpp"
#include "elbsde/risk_adjusted.hpp"
#include "support.hpp"

using namespace elbsde;

namespace {

// RK4 for beta' = -m + q beta + sigma^2 beta^2 / 2, beta(0) = 0: the exponent of
// E[exp(-m int lambda)] for the Feller intensity, solved without the closed form.
double riccati_beta(double t, double m, const ModelParams& p) {
  auto f = [&](double b) { return -m + p.q * b + 0.5 * p.sigma_lambda * p.sigma_lambda * b * b; };
  const int n = 20000;
  const double h = t / n;
  double b = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k1 = f(b), k2 = f(b + 0.5 * h * k1), k3 = f(b + 0.5 * h * k2), k4 = f(b + h * k3);
    b += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return b;
}

}  // namespace

TEST(ModelParams, DefaultsValidate) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(p.corr(0, 1), -0.4);
  EXPECT_DOUBLE_EQ(p.corr(2, 3), -0.3);
}

TEST(ModelParams, InvariantsNameTheField) {
  auto field_of = [](ModelParams p) {
    try {
      p.validate();
    } catch (const InvariantViolation& e) {
      return e.field();
    }
    return std::string();
  };
  ModelParams p;
  p.sigma_v = 1.0;  // 2 kappa eta < sigma_v^2
  EXPECT_EQ(field_of(p), "sigma_v");
  p = {};
  p.T_star = 0.5;
  EXPECT_EQ(field_of(p), "T_star");
  p = {};
  p.q = 0.0;
  EXPECT_EQ(field_of(p), "q");
  p = {};
  p.corr(4, 0) = p.corr(0, 4) = 0.1;
  EXPECT_EQ(field_of(p), "corr");
  p = {};
  p.corr(0, 1) = p.corr(1, 0) = 0.99;
  p.corr(0, 2) = p.corr(2, 0) = 0.99;
  p.corr(1, 2) = p.corr(2, 1) = -0.99;
  EXPECT_EQ(field_of(p), "corr");  // not PSD
}

TEST(BondCoefficients, VanishAtMaturity) {
  ModelParams p;
  const auto bc = bond_coefficients(p.T_star, p);
  EXPECT_EQ(bc.A, 0.0);
  EXPECT_EQ(bc.B, 0.0);
  EXPECT_EQ(bc.zeta, 0.0);
}

TEST(BondCoefficients, BaseValues) {
  ModelParams p;
  const auto bc = bond_coefficients(0.0, p);
  // reference values from an independent 30-digit evaluation
  EXPECT_NEAR(bc.A, -0.01030670373319856, 1e-15);
  EXPECT_NEAR(bc.B, -0.01323210786342997, 1e-15);
  EXPECT_NEAR(bc.zeta, 0.002353881159662853, 1e-15);
}

TEST(BondCoefficients, SignsAndZeroPremium) {
  ModelParams p;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const auto bc = bond_coefficients(t, p);
    EXPECT_LE(bc.A, 0.0);
    EXPECT_LE(bc.B, 0.0);
    if (t < p.T_star) {
      EXPECT_GT(bc.zeta, 0.0);
    }
  }
  p.delta_x = p.delta_y = 0.0;
  EXPECT_EQ(bond_coefficients(0.3, p).zeta, 0.0);
}

TEST(ShortRate, Examples) {
  ModelParams p;
  EXPECT_DOUBLE_EQ(short_rate(0, 0, 0, p), 0.02);
  EXPECT_DOUBLE_EQ(short_rate(0, 0.005, 0.005, p), 0.03);
  p.psi_const = 0.0;
  EXPECT_DOUBLE_EQ(short_rate(0, 0.01, -0.01, p), 0.0);
}

TEST(Survival, ClosedFormMatchesRiccati) {
  ModelParams p;
  for (double t : {0.25, 1.0, 3.0})
    for (double m : {1.0, 2.0})
      EXPECT_NEAR(detail::feller_exponent(t, m, p), riccati_beta(t, m, p), 1e-11) << t << " " << m;
}

TEST(Survival, BaseValues) {
  ModelParams p;
  EXPECT_NEAR(detail::feller_exponent(1.0, 1.0, p), -1.057064, 1e-6);
  EXPECT_NEAR(survival_prob(1.0, 0.015, p), 0.984269, 1e-6);
  EXPECT_DOUBLE_EQ(survival_prob(0.0, 0.3, p), 1.0);
  EXPECT_DOUBLE_EQ(joint_survival_prob(1.0, 0.0, p), 1.0);
}

TEST(Survival, DeterministicLimit) {
  ModelParams p;
  p.sigma_lambda = 0.0;
  const double lam0 = 0.015, t = 2.0;
  EXPECT_NEAR(survival_prob(t, lam0, p), std::exp(-lam0 * std::expm1(p.q * t) / p.q), 1e-15);
  EXPECT_NEAR(joint_survival_prob(t, lam0, p), std::pow(survival_prob(t, lam0, p), 2), 1e-15);
}

TEST(Survival, JointExceedsSquareAndGrowsWithVolatility) {
  ModelParams p;
  const double s = survival_prob(1.0, 0.015, p);
  const double j = joint_survival_prob(1.0, 0.015, p);
  EXPECT_NEAR(j, 0.96879, 1e-5);
  EXPECT_GT(j, s * s);
  double prev = 0.0;
  for (double sl = 0.0; sl <= 0.1; sl += 0.01) {
    p.sigma_lambda = sl;
    const double v = joint_survival_prob(1.0, 0.015, p);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Survival, MonotoneInTimeAndIntensity) {
  ModelParams p;
  for (double t = 0.0; t < 5.0; t += 0.25) {
    EXPECT_GE(survival_prob(t, 0.015, p), survival_prob(t + 0.25, 0.015, p));
    EXPECT_GE(survival_prob(t, 0.01, p), survival_prob(t, 0.02, p));
  }
}

TEST(Drift, Examples) {
  ModelParams p;
  State s;
  EXPECT_DOUBLE_EQ(drift_mu(0, s, p)[kLambda], 0.11 * 0.015);
  s.v = p.eta;
  EXPECT_DOUBLE_EQ(drift_mu(0, s, p)[kVar], 0.0);
  p.delta_x = p.delta_y = p.gamma = p.c = p.u = 0.0;
  s = State{0.003, 0.001, 1.3, 0.1, 0.015, 100};
  EXPECT_NEAR(drift_mu(0.2, s, p)[kFund], short_rate(0.2, s.x, s.y, p) * s.f, 1e-15);
}

TEST(Diffusion, Structure) {
  ModelParams p;
  State s;
  s.v = 0.0;
  s.lam = 0.0;
  Matrix5 sig = diffusion_sigma(0.0, s, p);
  EXPECT_TRUE(sig.row(kVar).isZero(0));
  EXPECT_TRUE(sig.row(kLambda).isZero(0));

  p.u = 1.0;
  s = State{};
  const auto bc = bond_coefficients(0.0, p);
  sig = diffusion_sigma(0.0, s, p);
  EXPECT_DOUBLE_EQ(sig(kFund, 0), bc.A);
  EXPECT_DOUBLE_EQ(sig(kFund, 1), bc.B);
  EXPECT_EQ(sig(kFund, 2), 0.0);

  p.u = 0.0;
  EXPECT_NEAR(diffusion_sigma(0.0, s, p)(kFund, 2), 0.31622776601683794, 1e-15);
}

TEST(Diffusion, CovarianceIsPsd) {
  ModelParams p;
  std::mt19937_64 eng(5);
  for (int i = 0; i < 200; ++i) {
    const State s = testutil::random_state(eng);
    const Matrix5 sig = diffusion_sigma(testutil::random_time(eng), s, p);
    const Matrix5 cov = sig * p.corr * sig.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix5> es(0.5 * (cov + cov.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-14);
  }
}

TEST(RiskAdjustedDrift, Examples) {
  ModelParams p;
  State s;
  const Vector5 mu = risk_adjusted_drift(0.0, s, p);
  EXPECT_NEAR(mu[kFund], 0.01, 1e-15);
  EXPECT_DOUBLE_EQ(mu[kLambda], p.q * s.lam);

  p.delta_x = p.delta_y = p.gamma = 0.0;
  EXPECT_LT((risk_adjusted_drift(0.3, s, p) - drift_mu(0.3, s, p)).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(RiskAdjustedDrift, DefiningIdentity) {
  ModelParams p;
  std::mt19937_64 eng(11);
  for (int i = 0; i < 500; ++i) {
    const double t = testutil::random_time(eng);
    const State s = testutil::random_state(eng);
    const Gradient5 g = testutil::random_gradient(eng);
    const HedgePosition h = optimal_hedge(t, s, g, p);
    const double lhs = g.row() * risk_adjusted_drift(t, s, p);
    const double rhs = g.row() * drift_mu(t, s, p) - h.theta1 * bond_coefficients(t, p).zeta -
                       h.theta2 * p.gamma * std::sqrt(s.v);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(ResidualSigma, Structure) {
  ModelParams p;
  State s;
  const Matrix5 sig = diffusion_sigma(0.2, s, p);
  const Matrix5 res = residual_sigma(0.2, s, p);
  EXPECT_TRUE(res.col(3).isApprox(sig.col(3)));
  EXPECT_TRUE(res.col(4).isApprox(sig.col(4)));
  EXPECT_TRUE((RowVector5::Zero() * res).isZero(0));
}

TEST(ResidualSigma, MatchesMinimisedLocalVariance) {
  ModelParams p;
  std::mt19937_64 eng(3);
  for (int i = 0; i < 10; ++i) {
    const double t = testutil::random_time(eng);
    const State s = testutil::random_state(eng);
    const Gradient5 g = testutil::random_gradient(eng);
    const RowVector5 w = g.row() * residual_sigma(t, s, p);
    const double via_sigma_star = w * p.corr * w.transpose();
    const double minimised = local_variance(t, s, g, optimal_hedge(t, s, g, p), p);
    EXPECT_NEAR(via_sigma_star, minimised, 1e-10);
    EXPECT_NEAR(g.row() * residual_covariance(t, s, p) * g.row().transpose(), minimised, 1e-10);
  }
}
