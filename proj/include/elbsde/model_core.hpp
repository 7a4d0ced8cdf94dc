#pragma once

#include <algorithm>
#include <cmath>

#include "elbsde/model_params.hpp"

namespace elbsde {

/// Volatility loadings of the zero-coupon bond maturing at T* and its risk premium.
struct BondCoefficients {
  double A;
  double B;
  double zeta;
};

inline BondCoefficients bond_coefficients(double t, const ModelParams& p) {
  const double tau = p.T_star - t;
  const double A = -p.sigma_x * (-std::expm1(-p.a * tau)) / p.a;
  const double B = -p.sigma_y * (-std::expm1(-p.b * tau)) / p.b;
  return {A, B, A * p.delta_x + B * p.delta_y};
}

inline double short_rate(double /*t*/, double x, double y, const ModelParams& p) {
  return p.psi_const + x + y;
}

namespace detail {

// Exponent coefficient of E[exp(-m * int_0^t lambda)] for the Feller intensity,
// m = 1 for one life and m = 2 for two lives.
inline double feller_exponent(double t, double m, const ModelParams& p) {
  if (p.sigma_lambda == 0.0) return -m * std::expm1(p.q * t) / p.q;
  const double bb = -std::sqrt(p.q * p.q + 2.0 * m * p.sigma_lambda * p.sigma_lambda);
  const double b1 = 0.5 * (bb + p.q);
  const double b2 = 0.5 * (bb - p.q);
  const double e = std::exp(bb * t);
  return m * (-std::expm1(bb * t)) / (b1 + b2 * e);
}

}  // namespace detail

/// P(tau > t) = exp(beta(t) * lambda0).
inline double survival_prob(double t, double lam0, const ModelParams& p) {
  return std::exp(detail::feller_exponent(t, 1.0, p) * lam0);
}

/// Probability that two given policyholders both survive to T.
inline double joint_survival_prob(double T, double lam0, const ModelParams& p) {
  return std::exp(detail::feller_exponent(T, 2.0, p) * lam0);
}

/// Real-world drift of z.
inline Vector5 drift_mu(double t, const State& s, const ModelParams& p) {
  const auto bc = bond_coefficients(t, p);
  const double r = short_rate(t, s.x, s.y, p);
  const double sv = std::sqrt(std::max(s.v, 0.0));
  Vector5 mu;
  mu[kX] = p.delta_x * p.sigma_x - p.a * s.x;
  mu[kY] = p.delta_y * p.sigma_y - p.b * s.y;
  mu[kFund] = (r - p.c + p.u * bc.zeta + (1.0 - p.u) * p.gamma * sv) * s.f;
  mu[kVar] = p.kappa * (p.eta - std::max(s.v, 0.0));
  mu[kLambda] = p.q * std::max(s.lam, 0.0);
  return mu;
}

/// Diffusion matrix of z; row i holds the loadings of factor i on (W1..W5).
inline Matrix5 diffusion_sigma(double t, const State& s, const ModelParams& p) {
  const auto bc = bond_coefficients(t, p);
  const double sv = std::sqrt(std::max(s.v, 0.0));
  Matrix5 sig = Matrix5::Zero();
  sig(kX, 0) = p.sigma_x;
  sig(kY, 1) = p.sigma_y;
  sig(kFund, 0) = p.u * s.f * bc.A;
  sig(kFund, 1) = p.u * s.f * bc.B;
  sig(kFund, 2) = (1.0 - p.u) * s.f * sv;
  sig(kVar, 3) = p.sigma_v * sv;
  sig(kLambda, 4) = p.sigma_lambda * std::sqrt(std::max(s.lam, 0.0));
  return sig;
}

}  // namespace elbsde
