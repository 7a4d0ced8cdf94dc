#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "elbsde/risk_adjusted.hpp"

namespace elbsde {

/// Uniform time grid 0 = t_0 < ... < t_N = T.
struct GridSpec {
  int n_steps = 100;
  double dt = 0.01;

  double horizon() const { return n_steps * dt; }
  double time(int n) const { return n * dt; }

  static GridSpec uniform(double T, int n_steps) {
    if (n_steps < 1 || !(T > 0.0)) throw InvariantViolation("grid", "need n_steps >= 1 and T > 0");
    return {n_steps, T / n_steps};
  }

  /// Grid with step dt spanning [0, T]; dt must divide T.
  static GridSpec from_step(double T, double dt) {
    if (!(dt > 0.0) || !(T > 0.0)) throw InvariantViolation("dt", "must be positive");
    const auto n = static_cast<int>(std::llround(T / dt));
    if (n < 1 || std::abs(n * dt - T) > 1e-12) throw InvariantViolation("dt", "must divide the horizon T");
    return {n, dt};
  }

  bool operator==(const GridSpec&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Box of initial states; the policy count is an integer range.
struct InitRegion {
  Interval x, y, f, v, lam;
  int k_lo = 100;
  int k_hi = 100;

  static InitRegion point(const State& s) {
    return {{s.x, s.x}, {s.y, s.y}, {s.f, s.f}, {s.v, s.v}, {s.lam, s.lam}, s.k, s.k};
  }

  /// x(0), y(0) in [0, 0.01]; F, v, lambda and J scaled by +/-25% around `base`.
  static InitRegion surface(const State& base) {
    auto pm = [](double c) { return Interval{0.75 * c, 1.25 * c}; };
    return {{0.0, 0.01},
            {0.0, 0.01},
            pm(base.f),
            pm(base.v),
            pm(base.lam),
            static_cast<int>(std::lround(0.75 * base.k)),
            static_cast<int>(std::lround(1.25 * base.k))};
  }

  bool contains(const State& s) const {
    return x.contains(s.x) && y.contains(s.y) && f.contains(s.f) && v.contains(s.v) && lam.contains(s.lam) &&
           s.k >= k_lo && s.k <= k_hi;
  }

  void validate() const {
    for (const Interval* iv : {&x, &y, &f, &v, &lam})
      if (!(iv->lo <= iv->hi)) throw InvariantViolation("region", "lower bound exceeds upper bound");
    if (k_lo > k_hi || k_lo < 0) throw InvariantViolation("region", "bad policy-count range");
    if (f.lo <= 0.0 || v.lo < 0.0 || lam.lo < 0.0) throw InvariantViolation("region", "state outside domain");
  }

  bool operator==(const InitRegion&) const = default;
};

enum class Measure { RealWorld, RiskAdjusted };

/// Simulated trajectories, path-major. State n of path i is the value at t_n;
/// dW and dN at step n are the increments over [t_n, t_{n+1}].
struct PathBundle {
  int n_paths = 0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  Measure measure = Measure::RiskAdjusted;
  std::vector<State> states;
  std::vector<Vector5> dW;
  std::vector<int> dN;

  const State& state(int path, int step) const {
    return states[static_cast<std::size_t>(path) * (n_steps + 1) + step];
  }
  const Vector5& dw(int path, int step) const { return dW[static_cast<std::size_t>(path) * n_steps + step]; }
  int dn(int path, int step) const { return dN[static_cast<std::size_t>(path) * n_steps + step]; }
};

// ---------------------------------------------------------------------------
// randomness

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent engine for substream `index` of `seed`; `tag` separates uses.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0) {
  const std::uint64_t s0 = splitmix64(seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
  return std::mt19937_64(splitmix64(s0 + splitmix64(index)));
}

/// Lower-triangular L with L L^T = Q. Pivots in [-1e-10, 0] are clamped to zero.
inline Matrix5 correlation_factorization(const Matrix5& Q) {
  Matrix5 L = Matrix5::Zero();
  for (int j = 0; j < 5; ++j) {
    double pivot = Q(j, j);
    for (int m = 0; m < j; ++m) pivot -= L(j, m) * L(j, m);
    if (pivot < -1e-10) throw NotPSD(pivot);
    const double d = pivot > 0.0 ? std::sqrt(pivot) : 0.0;
    L(j, j) = d;
    for (int i = j + 1; i < 5; ++i) {
      double s = Q(i, j);
      for (int m = 0; m < j; ++m) s -= L(i, m) * L(j, m);
      L(i, j) = d > 0.0 ? s / d : 0.0;
    }
  }
  return L;
}

inline Vector5 correlated_increment(const Matrix5& L, double sqrt_dt, std::mt19937_64& eng) {
  std::normal_distribution<double> normal;
  Vector5 xi;
  for (int i = 0; i < 5; ++i) xi[i] = normal(eng);
  return sqrt_dt * (L * xi);
}

/// Number of deaths among k heads over one step at intensity lam.
inline int sample_deaths(int k, double lam, double dt, std::mt19937_64& eng) {
  if (k <= 0 || lam <= 0.0) return 0;
  const double prob = -std::expm1(-lam * dt);
  std::binomial_distribution<int> dist(k, prob);
  return dist(eng);
}

inline std::vector<State> sample_initial_states(const InitRegion& region, int batch, std::mt19937_64& eng) {
  if (batch < 1) throw InvariantViolation("batch", "must be >= 1");
  auto draw = [&](const Interval& iv) {
    if (iv.lo == iv.hi) return iv.lo;
    return std::uniform_real_distribution<double>(iv.lo, iv.hi)(eng);
  };
  std::vector<State> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    State s;
    s.x = draw(region.x);
    s.y = draw(region.y);
    s.f = draw(region.f);
    s.v = draw(region.v);
    s.lam = draw(region.lam);
    s.k = region.k_lo == region.k_hi ? region.k_lo : std::uniform_int_distribution<int>(region.k_lo, region.k_hi)(eng);
    out.push_back(s);
  }
  return out;
}

/// One Euler step of z under the chosen measure with full truncation for v and lambda.
/// The policy count is left unchanged.
inline State euler_step(double t, const State& s, const Vector5& dW, double dt, Measure m, const ModelParams& p) {
  const Vector5 drift = m == Measure::RiskAdjusted ? risk_adjusted_drift(t, s, p) : drift_mu(t, s, p);
  Vector5 z = s.z() + drift * dt + diffusion_sigma(t, s, p) * dW;
  z[kVar] = std::max(z[kVar], 0.0);
  z[kLambda] = std::max(z[kLambda], 0.0);
  return State::from(z, s.k);
}

/// Simulates init.size() paths; path i uses substream i so it does not depend on the path count.
inline PathBundle simulate_paths(const ModelParams& p, const GridSpec& grid, const std::vector<State>& init,
                                 Measure measure, std::uint64_t seed) {
  const Matrix5 L = correlation_factorization(p.corr);
  const double sqrt_dt = std::sqrt(grid.dt);
  PathBundle pb;
  pb.n_paths = static_cast<int>(init.size());
  pb.n_steps = grid.n_steps;
  pb.seed = seed;
  pb.measure = measure;
  pb.states.resize(init.size() * (grid.n_steps + 1));
  pb.dW.resize(init.size() * grid.n_steps);
  pb.dN.resize(init.size() * grid.n_steps);

  for (int i = 0; i < pb.n_paths; ++i) {
    if (!init[i].valid()) throw InvariantViolation("init", "initial state outside the domain");
    auto eng = substream(seed, static_cast<std::uint64_t>(i));
    State s = init[i];
    const std::size_t base = static_cast<std::size_t>(i) * (grid.n_steps + 1);
    const std::size_t ibase = static_cast<std::size_t>(i) * grid.n_steps;
    pb.states[base] = s;
    for (int n = 0; n < grid.n_steps; ++n) {
      const double t = grid.time(n);
      const Vector5 dw = correlated_increment(L, sqrt_dt, eng);
      const int deaths = sample_deaths(s.k, s.lam, grid.dt, eng);
      State next = euler_step(t, s, dw, grid.dt, measure, p);
      next.k = s.k - deaths;
      pb.dW[ibase + n] = dw;
      pb.dN[ibase + n] = deaths;
      pb.states[base + n + 1] = next;
      s = next;
    }
  }
  return pb;
}

}  // namespace elbsde
