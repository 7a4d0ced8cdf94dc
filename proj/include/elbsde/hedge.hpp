#pragma once

#include <algorithm>
#include <cmath>

#include "elbsde/model_core.hpp"

namespace elbsde {

struct HedgePosition {
  double theta1 = 0.0;  // currency held in the bond
  double theta2 = 0.0;  // currency held in the equity
};

/// Partial derivatives of a price with respect to (x, y, F, v, lambda).
struct Gradient5 {
  double dphi_x = 0.0;
  double dphi_y = 0.0;
  double dphi_f = 0.0;
  double dphi_v = 0.0;
  double dphi_lam = 0.0;

  RowVector5 row() const { return RowVector5(dphi_x, dphi_y, dphi_f, dphi_v, dphi_lam); }
  static Gradient5 from(const RowVector5& g) { return {g[0], g[1], g[2], g[3], g[4]}; }
};

struct Benefits {
  double death;
  double survival;
};

inline Benefits benefits(double /*t*/, double f, const ModelParams& p) {
  return {std::max(p.d_star - f, 0.0), std::max(p.s_star - f, 0.0)};
}

struct CorrWeights {
  double rho_x;
  double rho_y;
  double rho_v;
};

/// Correlation-adjusted bond loadings that enter the optimal hedge.
inline CorrWeights corr_weights(double t, const ModelParams& p) {
  const auto [A, B, zeta] = bond_coefficients(t, p);
  const Matrix5& Q = p.corr;
  const double r12 = Q(0, 1), r13 = Q(0, 2), r23 = Q(1, 2);
  const double r14 = Q(0, 3), r24 = Q(1, 3), r34 = Q(2, 3);
  return {
      A + r12 * B - r13 * r13 * A - r13 * r23 * B,
      B + r12 * A - r23 * r13 * A - r23 * r23 * B,
      r14 * A + r24 * B - r34 * r13 * A - r34 * r23 * B,
  };
}

inline constexpr double kHedgeBasisTol = 1e-12;
inline constexpr double kVarianceFloor = 1e-10;

/// The optimal hedge is linear in the price gradient g:
///   theta1* = g . bond,   theta2* * sqrt(v) = g . equity_scaled.
/// The equity row is kept multiplied by sqrt(v) so it stays finite as v -> 0.
struct HedgeCoefficients {
  RowVector5 bond;
  RowVector5 equity_scaled;
};

inline HedgeCoefficients hedge_coefficients(double t, const State& s, const ModelParams& p) {
  const auto [A, B, zeta] = bond_coefficients(t, p);
  const auto [rx, ry, rv] = corr_weights(t, p);
  const double denom = A * rx + B * ry;
  if (!(std::abs(denom) >= kHedgeBasisTol)) throw DegenerateHedgeBasis();

  const Matrix5& Q = p.corr;
  const double r31 = Q(2, 0), r32 = Q(2, 1), r34 = Q(2, 3);
  const double cross = r31 * A + r32 * B;
  const double sv = std::sqrt(std::max(s.v, 0.0));

  HedgeCoefficients h;
  h.bond << p.sigma_x * rx / denom, p.sigma_y * ry / denom, p.u * s.f, p.sigma_v * sv * rv / denom, 0.0;
  h.equity_scaled << p.sigma_x * (r31 - cross * rx / denom), p.sigma_y * (r32 - cross * ry / denom),
      (1.0 - p.u) * s.f * sv, p.sigma_v * sv * (r34 - cross * rv / denom), 0.0;
  return h;
}

/// Bond and equity holdings that minimise the local variance of the net asset value.
inline HedgePosition optimal_hedge(double t, const State& s, const Gradient5& g, const ModelParams& p) {
  const auto h = hedge_coefficients(t, s, p);
  if (s.v < kVarianceFloor) throw VanishingVariance();
  const RowVector5 gr = g.row();
  return {gr.dot(h.bond), gr.dot(h.equity_scaled) / std::sqrt(s.v)};
}

/// (g sigma - Theta(h)) Q (g sigma - Theta(h))^T.
inline double local_variance(double t, const State& s, const Gradient5& g, const HedgePosition& h,
                             const ModelParams& p) {
  const auto bc = bond_coefficients(t, p);
  RowVector5 w = g.row() * diffusion_sigma(t, s, p);
  w[0] -= h.theta1 * bc.A;
  w[1] -= h.theta1 * bc.B;
  w[2] -= h.theta2 * std::sqrt(std::max(s.v, 0.0));
  return std::max(0.0, double(w * p.corr * w.transpose()));
}

}  // namespace elbsde
