#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "elbsde/hedge.hpp"
#include "elbsde/scenario.hpp"

namespace elbsde {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n_sims = 0;
};

namespace detail {

// Running mean and variance (Welford).
class MeanAccumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  McEstimate estimate() const {
    const double var = n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    return {mean_, std::sqrt(var / static_cast<double>(n_)), n_};
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// best-estimate liability

/// Discounted cash flows of the portfolio under the risk-adjusted drift, left-endpoint sums.
/// Paths are simulated one at a time; path i uses substream i of `seed`.
inline McEstimate bel_monte_carlo(const ModelParams& p, const State& s0, long n_sims, const GridSpec& grid,
                                  std::uint64_t seed) {
  p.validate();
  if (!s0.valid()) throw InvariantViolation("s0", "initial state outside the domain");
  if (n_sims < 2) throw InvariantViolation("n_sims", "must be >= 2");
  const Matrix5 L = correlation_factorization(p.corr);
  const double dt = grid.dt;
  const double sqrt_dt = std::sqrt(dt);

  detail::MeanAccumulator acc;
  for (long i = 0; i < n_sims; ++i) {
    auto eng = substream(seed, static_cast<std::uint64_t>(i));
    State s = s0;
    double disc = 1.0, pv = 0.0;
    for (int n = 0; n < grid.n_steps; ++n) {
      const double t = grid.time(n);
      pv += disc * (benefits(t, s.f, p).death * s.k * s.lam - p.c * s.k * s.f) * dt;
      disc *= std::exp(-short_rate(t, s.x, s.y, p) * dt);
      const Vector5 dw = correlated_increment(L, sqrt_dt, eng);
      const int deaths = sample_deaths(s.k, s.lam, dt, eng);
      State next = euler_step(t, s, dw, dt, Measure::RiskAdjusted, p);
      next.k = s.k - deaths;
      s = next;
    }
    pv += disc * s.k * benefits(grid.horizon(), s.f, p).survival;
    acc.add(pv);
  }
  return acc.estimate();
}

// ---------------------------------------------------------------------------
// Black-Scholes

inline double bs_put(double F0, double K, double r, double div, double sigma, double T) {
  if (sigma < 0.0 || T <= 0.0 || F0 <= 0.0 || K <= 0.0) throw InvariantViolation("bs_put", "bad arguments");
  const double fwd = F0 * std::exp((r - div) * T);
  const double df = std::exp(-r * T);
  if (sigma == 0.0) return df * std::max(K - fwd, 0.0);
  const double sd = sigma * std::sqrt(T);
  const double d1 = (std::log(fwd / K) + 0.5 * sd * sd) / sd;
  const double d2 = d1 - sd;
  return df * (K * detail::norm_cdf(-d2) - fwd * detail::norm_cdf(-d1));
}

inline double bs_call(double F0, double K, double r, double div, double sigma, double T) {
  if (sigma < 0.0 || T <= 0.0 || F0 <= 0.0 || K <= 0.0) throw InvariantViolation("bs_call", "bad arguments");
  const double fwd = F0 * std::exp((r - div) * T);
  const double df = std::exp(-r * T);
  if (sigma == 0.0) return df * std::max(fwd - K, 0.0);
  const double sd = sigma * std::sqrt(T);
  const double d1 = (std::log(fwd / K) + 0.5 * sd * sd) / sd;
  const double d2 = d1 - sd;
  return df * (fwd * detail::norm_cdf(d1) - K * detail::norm_cdf(d2));
}

// ---------------------------------------------------------------------------
// guaranteed minimum maturity benefit

/// Flat-rate Black-Scholes fund, constant mortality, survival benefit (S* - F(T))+.
struct GmmbParams {
  double r = 0.02;
  double sigma_f = 0.1;
  double lam_const = 0.015;
  double s_star = 1.02;
  double F0 = 1.0;
  double T = 1.0;
  int n = 100;
  double alpha = 0.1;

  /// Total death rate with k heads under the risk margin: k lam - alpha sqrt(k lam).
  double tilted_rate(int k) const {
    if (k <= 0) return 0.0;
    const double kl = k * lam_const;
    return kl - alpha * std::sqrt(kl);
  }

  void validate() const {
    if (!(sigma_f >= 0.0)) throw InvariantViolation("sigma_f", "must be non-negative");
    if (!(lam_const >= 0.0)) throw InvariantViolation("lam_const", "must be non-negative");
    if (!(alpha >= 0.0)) throw InvariantViolation("alpha", "must be non-negative");
    if (!(T > 0.0)) throw InvariantViolation("T", "must be positive");
    if (!(F0 > 0.0) || !(s_star > 0.0)) throw InvariantViolation("F0", "F0 and s_star must be positive");
    if (n < 0) throw InvariantViolation("n", "must be >= 0");
    for (int k = 1; k <= n; ++k)
      if (tilted_rate(k) < 0.0) throw NegativeRate(k);
  }

  bool operator==(const GmmbParams&) const = default;
};

/// E[J(T)] for the pure-death chain with state-k rate tilted_rate(k), from the forward
/// equations dp_k/dt = -R_k p_k + R_{k+1} p_{k+1} integrated by fixed-step RK4.
inline double death_expectation_tilted(const GmmbParams& g, double T) {
  g.validate();
  const int n = g.n;
  if (n == 0 || T <= 0.0) return n;
  Eigen::VectorXd R(n + 2);
  for (int k = 0; k <= n + 1; ++k) R[k] = k <= n ? g.tilted_rate(k) : 0.0;
  auto rhs = [&](const Eigen::VectorXd& pk) {
    Eigen::VectorXd d(n + 1);
    for (int k = 0; k <= n; ++k) d[k] = -R[k] * pk[k] + (k < n ? R[k + 1] * pk[k + 1] : 0.0);
    return d;
  };
  const int steps = static_cast<int>(std::ceil(T / 1e-3 - 1e-9));
  const double h = T / steps;
  Eigen::VectorXd pk = Eigen::VectorXd::Zero(n + 1);
  pk[n] = 1.0;
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXd k1 = rhs(pk);
    const Eigen::VectorXd k2 = rhs(pk + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(pk + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(pk + h * k3);
    pk += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  double e = 0.0;
  for (int k = 0; k <= n; ++k) e += k * pk[k];
  return e;
}

/// Survivors at T of the tilted chain, simulated exactly from exponential holding times.
inline int sample_tilted_survivors(const GmmbParams& g, double T, std::mt19937_64& eng) {
  int k = g.n;
  double t = 0.0;
  while (k > 0) {
    const double rate = g.tilted_rate(k);
    if (rate <= 0.0) break;
    t += std::exponential_distribution<double>(rate)(eng);
    if (t > T) break;
    --k;
  }
  return k;
}

/// J(T) and F(T) are independent under the tilted measure, so the price factorizes.
inline double gmmb_price_semi_analytic(const GmmbParams& g) {
  return death_expectation_tilted(g, g.T) * bs_put(g.F0, g.s_star, g.r, 0.0, g.sigma_f, g.T);
}

inline McEstimate gmmb_price_monte_carlo(const GmmbParams& g, long n_sims, std::uint64_t seed) {
  g.validate();
  if (n_sims < 2) throw InvariantViolation("n_sims", "must be >= 2");
  const double df = std::exp(-g.r * g.T);
  const double drift = (g.r - 0.5 * g.sigma_f * g.sigma_f) * g.T;
  const double sd = g.sigma_f * std::sqrt(g.T);
  detail::MeanAccumulator acc;
  for (long i = 0; i < n_sims; ++i) {
    auto eng = substream(seed, static_cast<std::uint64_t>(i));
    const double fT = g.F0 * std::exp(drift + sd * std::normal_distribution<double>()(eng));
    const int jT = sample_tilted_survivors(g, g.T, eng);
    acc.add(df * jT * std::max(g.s_star - fT, 0.0));
  }
  return acc.estimate();
}

/// Embedding of the GMMB case into the full model: no fee, no death benefit, a pure equity
/// fund with constant variance sigma_f^2 and no premium, frozen mortality, and rate factors
/// with a = b, no market price and a vanishing (but hedgeable) volatility so r stays at
/// the flat rate. With Q = I the only unhedged risk left is the jump term of the driver.
inline ModelParams gmmb_model(const GmmbParams& g) {
  ModelParams p;
  p.a = p.b = 0.2770;
  p.sigma_x = p.sigma_y = 1e-4;
  p.delta_x = p.delta_y = 0.0;
  p.psi_const = g.r;
  p.kappa = 0.0;
  p.eta = g.sigma_f * g.sigma_f;
  p.sigma_v = 0.0;
  p.gamma = 0.0;
  p.q = 1e-12;
  p.sigma_lambda = 0.0;
  p.u = 0.0;
  p.c = 0.0;
  p.d_star = 0.0;
  p.s_star = g.s_star;
  p.alpha = g.alpha;
  p.T = p.T_star = g.T;
  p.corr = Matrix5::Identity();
  return p;
}

inline State gmmb_state(const GmmbParams& g) {
  return State{0.0, 0.0, g.F0, g.sigma_f * g.sigma_f, g.lam_const, g.n};
}

}  // namespace elbsde
