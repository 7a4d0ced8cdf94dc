#pragma once

#include <cmath>

#include "elbsde/hedge.hpp"

namespace elbsde {

/// Drift of z after the hedgeable risk premia are removed:
/// g . mu* = g . mu - theta1*(g) zeta - theta2*(g) gamma sqrt(v) for every g.
inline Vector5 risk_adjusted_drift(double t, const State& s, const ModelParams& p) {
  const auto bc = bond_coefficients(t, p);
  const auto h = hedge_coefficients(t, s, p);
  return drift_mu(t, s, p) - bc.zeta * h.bond.transpose() - p.gamma * h.equity_scaled.transpose();
}

/// The hedge part sigma~ with Theta*(g) = g sigma~.
inline Matrix5 hedge_sigma(double t, const State& s, const ModelParams& p) {
  const auto bc = bond_coefficients(t, p);
  const auto h = hedge_coefficients(t, s, p);
  Matrix5 tilde = Matrix5::Zero();
  tilde.col(0) = bc.A * h.bond.transpose();
  tilde.col(1) = bc.B * h.bond.transpose();
  tilde.col(2) = h.equity_scaled.transpose();
  return tilde;
}

/// sigma* = sigma - sigma~; g sigma* is the unhedgeable diffusion exposure.
inline Matrix5 residual_sigma(double t, const State& s, const ModelParams& p) {
  return diffusion_sigma(t, s, p) - hedge_sigma(t, s, p);
}

/// sigma* Q sigma*^T, so that the minimised local variance is g M g^T.
inline Matrix5 residual_covariance(double t, const State& s, const ModelParams& p) {
  const Matrix5 ss = residual_sigma(t, s, p);
  Matrix5 m = ss * p.corr * ss.transpose();
  return 0.5 * (m + m.transpose());
}

}  // namespace elbsde
