#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "elbsde/deepnet/adam.hpp"
#include "elbsde/deepnet/checkpoint.hpp"
#include "elbsde/deepnet/mlp.hpp"
#include "elbsde/driver.hpp"
#include "elbsde/scenario.hpp"

namespace elbsde {

/// Feature layout shared by the three networks: (t, x, y, F, v, lambda, k).
/// N1 sees features 1..6; N2 and N3 see all seven.
inline constexpr int kFeatures = 7;

/// The three approximators: N1 prices at time 0, N2 returns the price gradient along a path,
/// N3 returns the price with one policyholder fewer.
struct NetworkSet {
  nn::Mlp n1{"n1", {6, 20, 20, 1}};
  nn::Mlp n2{"n2", {7, 20, 20, 5}};
  nn::Mlp n3{"n3", {7, 20, 20, 1}};
  nn::Normalizer nz;

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> out;
    for (nn::Mlp* net : {&n1, &n2, &n3})
      for (nn::Param* p : net->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (nn::Param* p : params()) p->zero_grad();
  }

  void validate() const {
    nz.validate();
    if (nz.dim() != kFeatures) throw DimMismatch(kFeatures, nz.dim());
    if (n1.dims != std::vector<int>{6, 20, 20, 1}) throw InvariantViolation("n1", "layer dims");
    if (n2.dims != std::vector<int>{7, 20, 20, 5}) throw InvariantViolation("n2", "layer dims");
    if (n3.dims != std::vector<int>{7, 20, 20, 1}) throw InvariantViolation("n3", "layer dims");
  }

  nn::Checkpoint to_checkpoint() const { return {nz, {n1, n2, n3}}; }

  static NetworkSet from_checkpoint(const nn::Checkpoint& ck) {
    NetworkSet ns;
    ns.nz = ck.normalizer;
    bool seen[3] = {false, false, false};
    for (const auto& net : ck.nets) {
      if (net.name == "n1") ns.n1 = net, seen[0] = true;
      else if (net.name == "n2") ns.n2 = net, seen[1] = true;
      else if (net.name == "n3") ns.n3 = net, seen[2] = true;
    }
    if (!(seen[0] && seen[1] && seen[2])) throw Error("checkpoint lacks one of n1, n2, n3");
    ns.validate();
    return ns;
  }
};

/// Input scaling: t over [0, T], k over [0, k_max], the five risk factors over the
/// training region. A degenerate interval is widened to its centre +/- max(25%, 0.005).
inline nn::Normalizer make_normalizer(const InitRegion& region, double T) {
  auto span_of = [](const Interval& iv) {
    if (iv.hi - iv.lo > 1e-12) return iv;
    const double c = 0.5 * (iv.lo + iv.hi);
    const double h = std::max(0.25 * std::abs(c), 0.005);
    return Interval{c - h, c + h};
  };
  nn::Normalizer nz;
  nz.lo.resize(kFeatures);
  nz.hi.resize(kFeatures);
  const Interval ivs[] = {{0.0, T},
                          span_of(region.x),
                          span_of(region.y),
                          span_of(region.f),
                          span_of(region.v),
                          span_of(region.lam),
                          {0.0, static_cast<double>(std::max(region.k_hi, 1))}};
  for (int i = 0; i < kFeatures; ++i) {
    nz.lo[i] = ivs[i].lo;
    nz.hi[i] = ivs[i].hi;
  }
  return nz;
}

namespace detail {

inline void write_features(const nn::Normalizer& nz, double t, const State& s, int k, double* out) {
  const double raw[kFeatures] = {t, s.x, s.y, s.f, s.v, s.lam, static_cast<double>(k)};
  for (int i = 0; i < kFeatures; ++i) out[i] = nz.normalize(raw[i], i);
}

}  // namespace detail

/// Normalized inputs of N2 (and of N3 when called with k - 1).
inline Eigen::VectorXd path_features(const nn::Normalizer& nz, double t, const State& s, int k) {
  Eigen::VectorXd f(kFeatures);
  detail::write_features(nz, t, s, k, f.data());
  return f;
}

inline Eigen::VectorXd initial_features(const nn::Normalizer& nz, const State& s) {
  return path_features(nz, 0.0, s, s.k).tail(kFeatures - 1);
}

inline Gradient5 eval_gradient(const NetworkSet& nets, double t, const State& s) {
  const Eigen::VectorXd g = nn::forward(nets.n2, path_features(nets.nz, t, s, s.k));
  return {g[0], g[1], g[2], g[3], g[4]};
}

/// N3 at (t, z, k - 1); identically zero for an empty portfolio.
inline double eval_price_one_fewer(const NetworkSet& nets, double t, const State& s) {
  if (s.k < 1) return 0.0;
  return nn::forward(nets.n3, path_features(nets.nz, t, s, s.k - 1))[0];
}

struct PriceAtZero {
  double value;
  bool outside_region;  // s0 lies outside the normalizer ranges the nets were trained on
};

inline PriceAtZero price_at_zero(const NetworkSet& nets, const State& s0) {
  const Eigen::VectorXd x = initial_features(nets.nz, s0);
  const bool outside = (x.array() < -1.0 - 1e-12).any() || (x.array() > 1.0 + 1e-12).any();
  return {nn::forward(nets.n1, x)[0], outside};
}

/// One Euler step of the liability price given the gradient g and the price with one
/// policyholder fewer:
///   phi' = phi - Upsilon dt - D k lam dt + (c k F + phi r) dt + g sigma dW
///          + (phi_km1 - phi)(dN - k lam dt).
inline double price_update(double t, const State& s, double phi, double phi_km1, const Gradient5& g,
                           const Vector5& dW, int dN, const ModelParams& p, double dt) {
  const double r = short_rate(t, s.x, s.y, p);
  const double lam = std::max(s.lam, 0.0);
  const double kl = s.k * lam;
  const double death = benefits(t, s.f, p).death;
  const double ups = driver_upsilon(t, s, phi, phi_km1, g, p);
  const double diffusion = g.row() * (diffusion_sigma(t, s, p) * dW);
  const double jump = s.k >= 1 ? (phi_km1 - phi) * (dN - kl * dt) : 0.0;
  return phi - ups * dt - death * kl * dt + (p.c * s.k * s.f + phi * r) * dt + diffusion + jump;
}

struct StepResult {
  double phi;
  State state;
};

inline StepResult rollout_step(const NetworkSet& nets, double t, const State& s, double phi, const Vector5& dW,
                               int dN, const ModelParams& p, double dt) {
  if (dN < 0 || dN > s.k) throw InvariantViolation("dN", "must lie in [0, k]");
  const Gradient5 g = eval_gradient(nets, t, s);
  const double phi_km1 = eval_price_one_fewer(nets, t, s);
  State next = euler_step(t, s, dW, dt, Measure::RiskAdjusted, p);
  next.k = s.k - dN;
  return {price_update(t, s, phi, phi_km1, g, dW, dN, p, dt), next};
}

struct TerminalPair {
  double phi_hat;
  double target;
};

/// Rolls every path of the bundle forward from N1 and pairs the terminal price with J(T) S(F(T)).
inline std::vector<TerminalPair> rollout_terminal(const NetworkSet& nets, const PathBundle& bundle,
                                                  const ModelParams& p, const GridSpec& grid) {
  if (bundle.measure != Measure::RiskAdjusted) throw InvariantViolation("bundle", "must be risk-adjusted");
  if (bundle.n_steps != grid.n_steps) throw DimMismatch(grid.n_steps, bundle.n_steps);
  std::vector<TerminalPair> out(bundle.n_paths);
  for (int i = 0; i < bundle.n_paths; ++i) {
    double phi = price_at_zero(nets, bundle.state(i, 0)).value;
    for (int n = 0; n < grid.n_steps; ++n) {
      const double t = grid.time(n);
      const State& s = bundle.state(i, n);
      phi = price_update(t, s, phi, eval_price_one_fewer(nets, t, s), eval_gradient(nets, t, s), bundle.dw(i, n),
                         bundle.dn(i, n), p, grid.dt);
    }
    const State& sT = bundle.state(i, grid.n_steps);
    out[i] = {phi, sT.k * benefits(grid.horizon(), sT.f, p).survival};
  }
  return out;
}

// ---------------------------------------------------------------------------
// batched rollout on the tape

/// Network inputs and path constants for a batch, laid out step-major:
/// column n * B + j holds path j at step n.
struct RolloutBatch {
  int batch = 0;
  int steps = 0;
  double dt = 0.0;
  nn::Array x1;         // 6 x B
  nn::Array x2;         // 7 x NB, inputs of N2
  nn::Array x3;         // 7 x NB, inputs of N3 (k - 1, clipped at 0)
  nn::Array jump_mask;  // 1 x NB, 1 where k >= 1
  nn::Array sdw;        // 5 x NB, sigma dW
  nn::Array cov;        // 15 x NB, upper triangle of sigma* Q sigma*^T
  nn::Array growth;     // 1 x NB, 1 + r dt - (dN - k lam dt)
  nn::Array comp;       // 1 x NB, dN - k lam dt
  nn::Array klam;       // 1 x NB
  nn::Array death;      // 1 x NB, D(t, F)
  nn::Array cash;       // 1 x NB, (c k F - D k lam) dt
  nn::Array target;     // 1 x B, J(T) S(F(T))
};

inline constexpr int kCovPairs = 15;

inline RolloutBatch make_rollout_batch(const PathBundle& bundle, std::span<const int> paths,
                                       const nn::Normalizer& nz, const ModelParams& p, const GridSpec& grid) {
  const int B = static_cast<int>(paths.size());
  const int N = grid.n_steps;
  const Eigen::Index NB = static_cast<Eigen::Index>(N) * B;
  RolloutBatch rb;
  rb.batch = B;
  rb.steps = N;
  rb.dt = grid.dt;
  rb.x1.resize(kFeatures - 1, B);
  rb.x2.resize(kFeatures, NB);
  rb.x3.resize(kFeatures, NB);
  rb.jump_mask.resize(1, NB);
  rb.sdw.resize(5, NB);
  rb.cov.setZero(kCovPairs, NB);
  rb.growth.resize(1, NB);
  rb.comp.resize(1, NB);
  rb.klam.resize(1, NB);
  rb.death.resize(1, NB);
  rb.cash.resize(1, NB);
  rb.target.resize(1, B);

  double feat[kFeatures];
  for (int j = 0; j < B; ++j) {
    const int i = paths[j];
    const State& s0 = bundle.state(i, 0);
    detail::write_features(nz, 0.0, s0, s0.k, feat);
    for (int f = 1; f < kFeatures; ++f) rb.x1(f - 1, j) = feat[f];
    for (int n = 0; n < N; ++n) {
      const Eigen::Index col = static_cast<Eigen::Index>(n) * B + j;
      const double t = grid.time(n);
      const State& s = bundle.state(i, n);
      detail::write_features(nz, t, s, s.k, feat);
      for (int f = 0; f < kFeatures; ++f) rb.x2(f, col) = feat[f];
      detail::write_features(nz, t, s, std::max(s.k - 1, 0), feat);
      for (int f = 0; f < kFeatures; ++f) rb.x3(f, col) = feat[f];

      const double r = short_rate(t, s.x, s.y, p);
      const double kl = s.k * std::max(s.lam, 0.0);
      const double comp = bundle.dn(i, n) - kl * grid.dt;
      const double death = benefits(t, s.f, p).death;
      rb.jump_mask(0, col) = s.k >= 1 ? 1.0 : 0.0;
      rb.sdw.col(col) = diffusion_sigma(t, s, p) * bundle.dw(i, n);
      rb.growth(0, col) = 1.0 + r * grid.dt - comp;
      rb.comp(0, col) = comp;
      rb.klam(0, col) = kl;
      rb.death(0, col) = death;
      rb.cash(0, col) = (p.c * s.k * s.f - death * kl) * grid.dt;
      if (p.alpha > 0.0) {
        const Matrix5 m = residual_covariance(t, s, p);
        int pair = 0;
        for (int a = 0; a < 5; ++a)
          for (int b = a; b < 5; ++b) rb.cov(pair++, col) = m(a, b);
      }
    }
    const State& sT = bundle.state(i, N);
    rb.target(0, j) = sT.k * benefits(grid.horizon(), sT.f, p).survival;
  }
  return rb;
}

/// Selects paths out of a batch built over a whole pool (same layout, fewer columns).
inline RolloutBatch gather_rollout_batch(const RolloutBatch& full, std::span<const int> paths) {
  const int B = static_cast<int>(paths.size());
  const int P = full.batch;
  RolloutBatch rb;
  rb.batch = B;
  rb.steps = full.steps;
  rb.dt = full.dt;
  auto pick = [&](const nn::Array& src, nn::Array& dst, int steps) {
    dst.resize(src.rows(), static_cast<Eigen::Index>(steps) * B);
    for (int n = 0; n < steps; ++n)
      for (int j = 0; j < B; ++j)
        dst.col(static_cast<Eigen::Index>(n) * B + j) = src.col(static_cast<Eigen::Index>(n) * P + paths[j]);
  };
  pick(full.x1, rb.x1, 1);
  pick(full.target, rb.target, 1);
  for (auto m : {&RolloutBatch::x2, &RolloutBatch::x3, &RolloutBatch::jump_mask, &RolloutBatch::sdw,
                 &RolloutBatch::cov, &RolloutBatch::growth, &RolloutBatch::comp, &RolloutBatch::klam,
                 &RolloutBatch::death, &RolloutBatch::cash})
    pick(full.*m, rb.*m, full.steps);
  return rb;
}

inline constexpr double kDriverSmoothing = 1e-12;

/// Records the batched rollout and returns the terminal mean squared error node.
inline nn::Var rollout_loss(nn::Tape& tape, NetworkSet& nets, const RolloutBatch& rb, double alpha) {
  using nn::Array;
  const int B = rb.batch;
  const double dt = rb.dt;

  nn::Var phi = nn::forward(tape, nets.n1, tape.constant(rb.x1));
  nn::Var G = nn::forward(tape, nets.n2, tape.constant(rb.x2));
  nn::Var P = nn::forward(tape, nets.n3, tape.constant(rb.x3)) * rb.jump_mask;

  nn::Var rows[5];
  for (int i = 0; i < 5; ++i) rows[i] = tape.row(G, i);

  // g sigma dW + N3 (dN - k lam dt) + cash flows, for all steps at once
  nn::Var lin = rows[0] * Array(rb.sdw.row(0));
  for (int i = 1; i < 5; ++i) lin = lin + rows[i] * Array(rb.sdw.row(i));
  lin = lin + P * rb.comp;
  lin = lin + rb.cash;

  // g sigma* Q sigma*^T g^T; pairs that vanish on the whole batch are skipped
  nn::Var quad{};
  bool have_quad = false;
  if (alpha > 0.0) {
    int pair = 0;
    for (int a = 0; a < 5; ++a) {
      for (int b = a; b < 5; ++b, ++pair) {
        if ((rb.cov.row(pair) == 0.0).all()) continue;
        const Array w = (a == b ? 1.0 : 2.0) * rb.cov.row(pair);
        nn::Var term = (rows[a] * rows[b]) * w;
        quad = have_quad ? quad + term : term;
        have_quad = true;
      }
    }
  }

  for (int n = 0; n < rb.steps; ++n) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(n) * B;
    nn::Var next = phi * Array(rb.growth.middleCols(c0, B)) + tape.cols(lin, static_cast<int>(c0), B);
    if (alpha > 0.0) {
      nn::Var jump = tape.cols(P, static_cast<int>(c0), B) - phi;
      jump = jump + Array(rb.death.middleCols(c0, B));
      nn::Var var = (jump * jump) * Array(rb.klam.middleCols(c0, B));
      if (have_quad) var = var + tape.cols(quad, static_cast<int>(c0), B);
      next = next - (alpha * dt) * tape.sqrt(var, kDriverSmoothing);
    }
    phi = next;
  }
  nn::Var err = phi + Array(-rb.target);
  return tape.mean(err * err);
}

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
  int epochs = 200;
  int batch_size = 200;
  int pool_size = 10000;
  GridSpec grid = GridSpec::from_step(1.0, 0.01);
  InitRegion region = InitRegion::point(State{});
  State base{};              // point whose N1 price is logged every epoch
  std::uint64_t seed = 42;
  bool fresh_paths = false;  // resimulate the pool every epoch instead of reusing it
  double learning_rate = 1e-3;

  void validate() const {
    if (epochs < 0) throw InvariantViolation("epochs", "must be >= 0");
    if (!base.valid()) throw InvariantViolation("base", "state outside the domain");
    if (batch_size < 1 || pool_size < 1) throw InvariantViolation("batch_size", "batch and pool must be positive");
    if (batch_size > pool_size) throw InvariantViolation("batch_size", "must not exceed pool_size");
    if (!(learning_rate > 0.0)) throw InvariantViolation("learning_rate", "must be positive");
    region.validate();
  }

  bool operator==(const TrainConfig&) const = default;
};

struct TrainReport {
  std::vector<double> mse;
  std::vector<double> base_price;
  std::string checkpoint_path;
};

using EpochCallback = std::function<void(int epoch, double mse, double base_price)>;

namespace detail {

inline constexpr std::uint64_t kTagInitStates = 1;
inline constexpr std::uint64_t kTagWeights = 2;
inline constexpr std::uint64_t kTagShuffle = 3;
inline constexpr std::uint64_t kTagPaths = 4;

/// Mean over the pool of discounted cash flows along each path.
inline double pool_cashflow_mean(const PathBundle& pool, const ModelParams& p, const GridSpec& grid) {
  double total = 0.0;
  for (int i = 0; i < pool.n_paths; ++i) {
    double disc = 1.0, acc = 0.0;
    for (int n = 0; n < grid.n_steps; ++n) {
      const double t = grid.time(n);
      const State& s = pool.state(i, n);
      acc += disc * (benefits(t, s.f, p).death * s.k * s.lam - p.c * s.k * s.f) * grid.dt;
      disc *= std::exp(-short_rate(t, s.x, s.y, p) * grid.dt);
    }
    const State& sT = pool.state(i, grid.n_steps);
    total += acc + disc * sT.k * benefits(grid.horizon(), sT.f, p).survival;
  }
  return total / pool.n_paths;
}

inline PathBundle simulate_pool(const TrainConfig& cfg, const ModelParams& p, std::uint64_t round) {
  auto eng = substream(cfg.seed, round, kTagInitStates);
  const auto init = sample_initial_states(cfg.region, cfg.pool_size, eng);
  return simulate_paths(p, cfg.grid, init, Measure::RiskAdjusted, splitmix64(cfg.seed ^ (kTagPaths << 32) ^ round));
}

}  // namespace detail

/// Fresh networks: Glorot hidden layers, zero output layers, N1 bias at `n1_bias`.
inline NetworkSet init_networks(const nn::Normalizer& nz, std::uint64_t seed, double n1_bias) {
  NetworkSet nets;
  nets.nz = nz;
  auto eng = substream(seed, 0, detail::kTagWeights);
  nn::init_glorot(nets.n1, eng);
  nn::init_glorot(nets.n2, eng);
  nn::init_glorot(nets.n3, eng);
  nets.n1.biases.back().value(0, 0) = n1_bias;
  return nets;
}

struct TrainResult {
  NetworkSet nets;
  TrainReport report;
};

/// Joint Adam training of N1, N2 and N3 on the terminal quadratic loss.
inline TrainResult train(const TrainConfig& cfg, const ModelParams& p, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  p.validate();
  if (std::abs(cfg.grid.horizon() - p.T) > 1e-12) throw InvariantViolation("grid", "horizon must equal T");

  PathBundle pool = detail::simulate_pool(cfg, p, 0);
  TrainResult res{init_networks(make_normalizer(cfg.region, p.T), cfg.seed, detail::pool_cashflow_mean(pool, p, cfg.grid)),
                  {}};
  NetworkSet& nets = res.nets;
  nn::AdamState adam;
  adam.lr = cfg.learning_rate;
  const auto params = nets.params();

  std::vector<int> order(cfg.pool_size);
  std::iota(order.begin(), order.end(), 0);
  RolloutBatch table = make_rollout_batch(pool, order, nets.nz, p, cfg.grid);
  const int n_batches = cfg.pool_size / cfg.batch_size;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.fresh_paths && epoch > 0) {
      pool = detail::simulate_pool(cfg, p, static_cast<std::uint64_t>(epoch));
      std::iota(order.begin(), order.end(), 0);
      table = make_rollout_batch(pool, order, nets.nz, p, cfg.grid);
    }
    std::iota(order.begin(), order.end(), 0);
    auto eng = substream(cfg.seed, static_cast<std::uint64_t>(epoch), detail::kTagShuffle);
    std::shuffle(order.begin(), order.end(), eng);

    double loss_sum = 0.0;
    for (int b = 0; b < n_batches; ++b) {
      const std::span<const int> idx(order.data() + static_cast<std::ptrdiff_t>(b) * cfg.batch_size, cfg.batch_size);
      const RolloutBatch rb = gather_rollout_batch(table, idx);
      nn::Tape tape;
      nets.zero_grad();
      const nn::Var loss = rollout_loss(tape, nets, rb, p.alpha);
      const double lv = tape.value(loss)(0, 0);
      tape.backward(loss);
      bool finite = std::isfinite(lv);
      for (const nn::Param* prm : params) finite = finite && prm->grad.allFinite();
      if (!finite) throw NonFiniteGradient(epoch);
      nn::adam_step(adam, params);
      loss_sum += lv;
    }
    const double mse = loss_sum / n_batches;
    const double price = price_at_zero(nets, cfg.base).value;
    res.report.mse.push_back(mse);
    res.report.base_price.push_back(price);
    if (on_epoch) on_epoch(epoch, mse, price);
  }
  return res;
}

}  // namespace elbsde
