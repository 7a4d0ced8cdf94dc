#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "elbsde/errors.hpp"

namespace elbsde {

using Vector5 = Eigen::Matrix<double, 5, 1>;
using RowVector5 = Eigen::Matrix<double, 1, 5>;
using Matrix5 = Eigen::Matrix<double, 5, 5>;

/// Risk-factor ordering used by every vector and matrix in the library.
enum Factor : int { kX = 0, kY = 1, kFund = 2, kVar = 3, kLambda = 4 };

inline Matrix5 default_correlation() {
  Matrix5 q;
  // clang-format off
  q <<  1.0,  -0.4,  0.35,  0.0, 0.0,
       -0.4,   1.0,  0.08,  0.0, 0.0,
        0.35,  0.08, 1.0,  -0.3, 0.0,
        0.0,   0.0, -0.3,   1.0, 0.0,
        0.0,   0.0,  0.0,   0.0, 1.0;
  // clang-format on
  return q;
}

/// Market, mortality and contract constants. Defaults are the base case:
/// G2++ rates, Heston equity, Feller mortality, D* = S* = 1.02 over one year.
struct ModelParams {
  // two-factor Gaussian short rate
  double a = 0.2770;
  double b = 0.0551;
  double sigma_x = 0.0118;
  double sigma_y = 0.0136;
  double delta_x = -0.1;
  double delta_y = -0.1;
  double psi_const = 0.02;
  // Heston variance and equity premium
  double kappa = 0.0231;
  double eta = 0.9052;
  double sigma_v = 0.1434;
  double gamma = 0.0113;
  // Feller mortality intensity
  double q = 0.11;
  double sigma_lambda = 0.007;
  // fund and contract
  double u = 0.5;
  double c = 0.01;
  double d_star = 1.02;
  double s_star = 1.02;
  double alpha = 0.1;
  double T = 1.0;
  double T_star = 1.0;
  Matrix5 corr = default_correlation();

  /// Throws InvariantViolation naming the first offending field.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

/// Risk-factor state z = (x, y, F, v, lambda) plus the number of in-force policies.
struct State {
  double x = 0.0;
  double y = 0.0;
  double f = 1.0;
  double v = 0.1;
  double lam = 0.015;
  int k = 100;

  Vector5 z() const { return Vector5(x, y, f, v, lam); }

  static State from(const Vector5& z, int k) { return State{z[0], z[1], z[2], z[3], z[4], k}; }

  bool valid() const { return f > 0.0 && v >= 0.0 && lam >= 0.0 && k >= 0; }

  bool operator==(const State&) const = default;
};

inline void ModelParams::validate() const {
  auto require = [](bool ok, const char* field, const char* why) {
    if (!ok) throw InvariantViolation(field, why);
  };
  auto finite = [](double v) { return std::isfinite(v); };

  require(finite(a) && a > 0.0, "a", "mean reversion must be positive");
  require(finite(b) && b > 0.0, "b", "mean reversion must be positive");
  require(finite(sigma_x) && sigma_x > 0.0, "sigma_x", "must be positive");
  require(finite(sigma_y) && sigma_y > 0.0, "sigma_y", "must be positive");
  require(finite(delta_x), "delta_x", "must be finite");
  require(finite(delta_y), "delta_y", "must be finite");
  require(finite(psi_const), "psi_const", "must be finite");
  require(finite(kappa) && kappa >= 0.0, "kappa", "must be non-negative");
  require(finite(eta) && eta >= 0.0, "eta", "must be non-negative");
  require(finite(sigma_v) && sigma_v >= 0.0, "sigma_v", "must be non-negative");
  require(2.0 * kappa * eta >= sigma_v * sigma_v, "sigma_v", "Feller condition 2*kappa*eta >= sigma_v^2 fails");
  require(finite(gamma), "gamma", "must be finite");
  require(finite(q) && q > 0.0, "q", "must be positive");
  require(finite(sigma_lambda) && sigma_lambda >= 0.0, "sigma_lambda", "must be non-negative");
  require(finite(u) && u >= 0.0 && u <= 1.0, "u", "must lie in [0, 1]");
  require(finite(c) && c >= 0.0, "c", "must be non-negative");
  require(finite(d_star) && d_star >= 0.0, "d_star", "must be non-negative");
  require(finite(s_star) && s_star >= 0.0, "s_star", "must be non-negative");
  require(finite(alpha) && alpha >= 0.0, "alpha", "must be non-negative");
  require(finite(T) && T > 0.0, "T", "must be positive");
  require(finite(T_star) && T_star >= T, "T_star", "must be >= T");

  require(corr.allFinite(), "corr", "must be finite");
  require((corr - corr.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "corr", "must be symmetric");
  for (int i = 0; i < 5; ++i) {
    require(std::abs(corr(i, i) - 1.0) <= 1e-12, "corr", "diagonal must be one");
    for (int j = 0; j < 5; ++j)
      require(std::abs(corr(i, j)) <= 1.0, "corr", "entries must lie in [-1, 1]");
  }
  for (int j = 0; j < 4; ++j)
    require(corr(kLambda, j) == 0.0, "corr", "mortality must be uncorrelated with financial factors");
  Eigen::SelfAdjointEigenSolver<Matrix5> eig(corr, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -1e-10, "corr", "must be positive semi-definite");
}

}  // namespace elbsde
