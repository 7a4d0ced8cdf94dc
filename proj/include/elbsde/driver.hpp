#pragma once

#include <cmath>

#include "elbsde/risk_adjusted.hpp"

namespace elbsde {

/// Risk-margin generator: alpha times the instantaneous standard deviation of the
/// unhedgeable part of the net asset value (residual diffusion plus death jumps).
/// The jump term is dropped for an empty portfolio.
inline double driver_upsilon(double t, const State& s, double phi_k, double phi_km1, const Gradient5& g,
                             const ModelParams& p) {
  if (p.alpha == 0.0) return 0.0;
  const RowVector5 gr = g.row();
  double var = gr * residual_covariance(t, s, p) * gr.transpose();
  var = std::max(var, 0.0);
  if (s.k >= 1) {
    const double jump = phi_km1 + benefits(t, s.f, p).death - phi_k;
    var += jump * jump * s.k * std::max(s.lam, 0.0);
  }
  return p.alpha * std::sqrt(var);
}

}  // namespace elbsde
