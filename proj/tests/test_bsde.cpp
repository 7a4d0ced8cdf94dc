#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "elbsde/bsde.hpp"
#include "elbsde/oracle.hpp"

using namespace elbsde;

namespace {

// Networks with every parameter random so that all three contribute.
NetworkSet random_networks(const nn::Normalizer& nz, std::uint64_t seed, double scale = 0.3) {
  NetworkSet nets = init_networks(nz, seed, 6.0);
  std::mt19937_64 eng(seed + 1);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (nn::Param* p : nets.params())
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value(i) += u(eng);
  return nets;
}

// Scalar re-evaluation of the batch loss, one path at a time.
double scalar_loss(const NetworkSet& nets, const PathBundle& b, const ModelParams& p, const GridSpec& g) {
  double s = 0.0;
  for (const auto& tp : rollout_terminal(nets, b, p, g)) s += (tp.phi_hat - tp.target) * (tp.phi_hat - tp.target);
  return s / b.n_paths;
}

double batch_loss(NetworkSet& nets, const PathBundle& b, const ModelParams& p, const GridSpec& g) {
  std::vector<int> idx(b.n_paths);
  std::iota(idx.begin(), idx.end(), 0);
  const RolloutBatch rb = make_rollout_batch(b, idx, nets.nz, p, g);
  nn::Tape tape;
  return tape.value(rollout_loss(tape, nets, rb, p.alpha))(0, 0);
}

}  // namespace

TEST(PriceUpdate, HandExample) {
  ModelParams p;
  p.alpha = 0.0;
  p.c = 0.0;
  p.psi_const = 0.0;
  State s;
  s.f = 1.5;  // D = 0
  // g sigma dW = g_x sigma_x dW_1 = 0.01
  Vector5 dW = Vector5::Zero();
  dW[0] = 0.01 / p.sigma_x;
  const Gradient5 g{1.0, 0, 0, 0, 0};
  EXPECT_NEAR(price_update(0.0, s, 6.0, 5.95, g, dW, 0, p, 0.01), 6.01075, 1e-12);
}

TEST(PriceUpdate, EmptyPortfolio) {
  ModelParams p;
  State s;
  s.k = 0;
  s.f = 0.9;
  std::mt19937_64 eng(4);
  const Vector5 dW = correlated_increment(correlation_factorization(p.corr), 0.1, eng);
  const Gradient5 g{0.3, -0.2, 1.1, 0.4, 2.0};
  const double r = short_rate(0.0, s.x, s.y, p);
  const double expected = 6.0 + 6.0 * r * 0.01 + double(g.row() * (diffusion_sigma(0.0, s, p) * dW)) -
                          driver_upsilon(0.0, s, 6.0, 0.0, g, p) * 0.01;
  EXPECT_NEAR(price_update(0.0, s, 6.0, 123.0, g, dW, 0, p, 0.01), expected, 1e-14);
}

TEST(PriceUpdate, OnlyCompensatorSurvives) {
  ModelParams p;
  p.alpha = p.c = p.psi_const = 0.0;
  State s;
  s.f = 2.0;
  EXPECT_NEAR(price_update(0.0, s, 6.0, 5.5, Gradient5{}, Vector5::Zero(), 0, p, 0.01),
              6.0 + (5.5 - 6.0) * (-100 * 0.015 * 0.01), 1e-14);
}

TEST(RolloutStep, AdvancesState) {
  ModelParams p;
  const auto nets = random_networks(make_normalizer(InitRegion::point(State{}), 1.0), 3);
  const State s;
  Vector5 dW = Vector5::Zero();
  const auto r = rollout_step(nets, 0.0, s, 6.0, dW, 2, p, 0.01);
  EXPECT_EQ(r.state.k, 98);
  EXPECT_THROW(rollout_step(nets, 0.0, s, 6.0, dW, 101, p, 0.01), InvariantViolation);
  EXPECT_THROW(rollout_step(nets, 0.0, s, 6.0, dW, -1, p, 0.01), InvariantViolation);
}

TEST(Networks, OneFewerIsZeroForEmptyPortfolio) {
  const auto nets = random_networks(make_normalizer(InitRegion::point(State{}), 1.0), 5);
  State s;
  s.k = 0;
  EXPECT_EQ(eval_price_one_fewer(nets, 0.3, s), 0.0);
  s.k = 1;
  EXPECT_NE(eval_price_one_fewer(nets, 0.3, s), 0.0);
}

TEST(Networks, NormalizerWidensDegenerateRanges) {
  const State base;
  const auto nz = make_normalizer(InitRegion::point(base), 1.0);
  EXPECT_NO_THROW(nz.validate());
  EXPECT_DOUBLE_EQ(nz.lo[0], 0.0);
  EXPECT_DOUBLE_EQ(nz.hi[0], 1.0);
  EXPECT_NEAR(nz.normalize(base.f, 3), 0.0, 1e-15);
  EXPECT_NEAR(nz.normalize(base.x, 1), 0.0, 1e-15);
  const auto sz = make_normalizer(InitRegion::surface(base), 1.0);
  EXPECT_DOUBLE_EQ(sz.lo[4], 0.075);
  EXPECT_DOUBLE_EQ(sz.hi[4], 0.125);
  EXPECT_DOUBLE_EQ(sz.hi[6], 125.0);
}

TEST(Networks, PriceAtZeroFlagsOutsideRegion) {
  const auto nets = random_networks(make_normalizer(InitRegion::surface(State{}), 1.0), 5);
  EXPECT_FALSE(price_at_zero(nets, State{}).outside_region);
  State far;
  far.f = 3.0;
  EXPECT_TRUE(price_at_zero(nets, far).outside_region);
  EXPECT_EQ(price_at_zero(nets, far).value, price_at_zero(nets, far).value);
}

// Noiseless, death-free bundle: phi grows by (1 + r dt) each step.
TEST(RolloutTerminal, DiscreteCompounding) {
  ModelParams p;
  p.alpha = p.c = 0.0;
  const GridSpec g = GridSpec::from_step(1.0, 0.01);
  State s0;
  s0.lam = 0.0;
  s0.f = 2.0;
  PathBundle b;
  b.n_paths = 1;
  b.n_steps = g.n_steps;
  b.states.assign(g.n_steps + 1, s0);
  b.dW.assign(g.n_steps, Vector5::Zero());
  b.dN.assign(g.n_steps, 0);
  const auto nets = random_networks(make_normalizer(InitRegion::point(s0), 1.0), 8);
  const double n1 = price_at_zero(nets, s0).value;
  double phi = n1;
  for (int n = 0; n < g.n_steps; ++n) phi *= 1.0 + p.psi_const * g.dt;
  const auto out = rollout_terminal(nets, b, p, g);
  EXPECT_NEAR(out[0].phi_hat, phi, 1e-12 * std::abs(phi));
  EXPECT_NEAR(out[0].phi_hat, n1 * std::exp(p.psi_const), 2e-4 * std::abs(n1));
  EXPECT_EQ(out[0].target, 0.0);  // F(T) = 2 > S*
}

TEST(RolloutTerminal, OneStepMatchesPriceUpdate) {
  ModelParams p;
  const GridSpec g = GridSpec::uniform(1.0, 1);
  p.T = p.T_star = 1.0;
  const State s0;
  const auto nets = random_networks(make_normalizer(InitRegion::point(s0), 1.0), 2);
  const PathBundle b = simulate_paths(p, g, {s0}, Measure::RiskAdjusted, 5);
  const double expected = price_update(0.0, s0, price_at_zero(nets, s0).value, eval_price_one_fewer(nets, 0.0, s0),
                                       eval_gradient(nets, 0.0, s0), b.dw(0, 0), b.dn(0, 0), p, g.dt);
  const auto out = rollout_terminal(nets, b, p, g);
  EXPECT_NEAR(out[0].phi_hat, expected, 1e-12);
  const State& sT = b.state(0, 1);
  EXPECT_DOUBLE_EQ(out[0].target, sT.k * std::max(p.s_star - sT.f, 0.0));
}

TEST(RolloutTerminal, RequiresRiskAdjustedBundle) {
  ModelParams p;
  const GridSpec g = GridSpec::uniform(1.0, 2);
  const PathBundle b = simulate_paths(p, g, {State{}}, Measure::RealWorld, 5);
  const auto nets = random_networks(make_normalizer(InitRegion::point(State{}), 1.0), 2);
  EXPECT_THROW(rollout_terminal(nets, b, p, g), InvariantViolation);
}

// The batched tape rollout and the scalar recursion describe the same computation.
TEST(Rollout, BatchedMatchesScalar) {
  ModelParams p;
  const GridSpec g = GridSpec::from_step(1.0, 0.01);
  const InitRegion region = InitRegion::surface(State{});
  std::mt19937_64 eng(12);
  const PathBundle b = simulate_paths(p, g, sample_initial_states(region, 40, eng), Measure::RiskAdjusted, 31);
  NetworkSet nets = random_networks(make_normalizer(region, 1.0), 4);
  for (double alpha : {0.0, 0.1}) {
    p.alpha = alpha;
    const double a = batch_loss(nets, b, p, g);
    const double s = scalar_loss(nets, b, p, g);
    EXPECT_NEAR(a, s, 1e-9 * s) << "alpha " << alpha;
  }
}

TEST(Rollout, GatheredBatchEqualsDirectBatch) {
  ModelParams p;
  const GridSpec g = GridSpec::from_step(1.0, 0.1);
  const InitRegion region = InitRegion::surface(State{});
  std::mt19937_64 eng(2);
  const PathBundle b = simulate_paths(p, g, sample_initial_states(region, 12, eng), Measure::RiskAdjusted, 3);
  const auto nz = make_normalizer(region, 1.0);
  std::vector<int> all(12);
  std::iota(all.begin(), all.end(), 0);
  const RolloutBatch full = make_rollout_batch(b, all, nz, p, g);
  const std::vector<int> pick{7, 2, 11, 0};
  const RolloutBatch direct = make_rollout_batch(b, pick, nz, p, g);
  const RolloutBatch gathered = gather_rollout_batch(full, pick);
  EXPECT_TRUE((direct.x2 == gathered.x2).all());
  EXPECT_TRUE((direct.x3 == gathered.x3).all());
  EXPECT_TRUE((direct.cov == gathered.cov).all());
  EXPECT_TRUE((direct.cash == gathered.cash).all());
  EXPECT_TRUE((direct.target == gathered.target).all());
  EXPECT_TRUE((direct.x1 == gathered.x1).all());
}

// End-to-end reverse-mode gradient of the loss against central differences.
TEST(Rollout, GradientMatchesFiniteDifferences) {
  ModelParams p;
  const GridSpec g = GridSpec::uniform(1.0, 2);
  std::mt19937_64 eng(21);
  const InitRegion region = InitRegion::surface(State{});
  const PathBundle b = simulate_paths(p, g, sample_initial_states(region, 2, eng), Measure::RiskAdjusted, 17);
  NetworkSet nets = random_networks(make_normalizer(region, 1.0), 6);
  std::vector<int> idx{0, 1};
  const RolloutBatch rb = make_rollout_batch(b, idx, nets.nz, p, g);

  nets.zero_grad();
  nn::Tape tape;
  tape.backward(rollout_loss(tape, nets, rb, p.alpha));

  auto loss = [&]() {
    nn::Tape t;
    return t.value(rollout_loss(t, nets, rb, p.alpha))(0, 0);
  };
  double worst = 0.0;
  int checked = 0;
  for (nn::Param* prm : nets.params())
    for (Eigen::Index i = 0; i < prm->value.size(); ++i) {
      const double keep = prm->value(i);
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      prm->value(i) = keep + h;
      const double up = loss();
      prm->value(i) = keep - h;
      const double dn = loss();
      prm->value(i) = keep;
      const double fd = (up - dn) / (2 * h);
      worst = std::max(worst, std::abs(fd - prm->grad(i)) / std::max(1.0, std::abs(fd)));
      ++checked;
    }
  EXPECT_GT(checked, 1500);
  EXPECT_LT(worst, 1e-4);
}

TEST(Train, ZeroEpochsReturnsInitialNetworks) {
  ModelParams p;
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.pool_size = 200;
  const TrainResult r = train(cfg, p);
  EXPECT_TRUE(r.report.mse.empty());
  EXPECT_TRUE(r.report.base_price.empty());
  const NetworkSet init = init_networks(r.nets.nz, cfg.seed, r.nets.n1.biases.back().value(0, 0));
  for (std::size_t l = 0; l < 3; ++l) EXPECT_TRUE(init.n2.weights[l].value == r.nets.n2.weights[l].value);
}

TEST(Train, DeterministicAndDecreasing) {
  ModelParams p;
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.pool_size = 400;
  cfg.batch_size = 100;
  const TrainResult a = train(cfg, p);
  const TrainResult b = train(cfg, p);
  EXPECT_EQ(a.report.mse, b.report.mse);
  EXPECT_EQ(a.report.base_price, b.report.base_price);
  ASSERT_EQ(a.report.mse.size(), 6u);
  EXPECT_LT(a.report.mse.back(), a.report.mse.front());

  cfg.fresh_paths = true;
  const TrainResult c = train(cfg, p);
  EXPECT_EQ(c.report.mse.front(), a.report.mse.front());  // first pool is shared
  EXPECT_NE(c.report.mse.back(), a.report.mse.back());
}

TEST(Train, InvalidConfigs) {
  ModelParams p;
  TrainConfig cfg;
  cfg.batch_size = cfg.pool_size + 1;
  EXPECT_THROW(train(cfg, p), InvariantViolation);
  cfg = {};
  cfg.grid = GridSpec::from_step(2.0, 0.01);
  EXPECT_THROW(train(cfg, p), InvariantViolation);
}

TEST(Train, DivergenceIsReported) {
  ModelParams p;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.pool_size = 200;
  cfg.batch_size = 50;
  cfg.learning_rate = 1e200;
  try {
    train(cfg, p);
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_GE(e.epoch(), 0);
    EXPECT_LT(e.epoch(), 3);
  }
}

TEST(Train, EmptyPortfolioPricesNearZero) {
  ModelParams p;
  TrainConfig cfg;
  cfg.base.k = 0;
  cfg.region = InitRegion::point(cfg.base);
  cfg.epochs = 3;
  cfg.pool_size = 400;
  const TrainResult r = train(cfg, p);
  EXPECT_EQ(bel_monte_carlo(p, cfg.base, 100, cfg.grid, 1).mean, 0.0);
  EXPECT_LT(std::abs(price_at_zero(r.nets, cfg.base).value), 1e-3);
}

TEST(Checkpoint, NetworkSetRoundTrip) {
  const auto nets = random_networks(make_normalizer(InitRegion::surface(State{}), 1.0), 1);
  std::stringstream ss;
  nn::write_checkpoint(ss, nets.to_checkpoint());
  const NetworkSet back = NetworkSet::from_checkpoint(nn::read_checkpoint(ss));
  State s;
  s.f = 0.93;
  EXPECT_EQ(price_at_zero(back, s).value, price_at_zero(nets, s).value);
  const Gradient5 g1 = eval_gradient(back, 0.4, s), g2 = eval_gradient(nets, 0.4, s);
  EXPECT_EQ(g1.row(), g2.row());
  EXPECT_EQ(eval_price_one_fewer(back, 0.4, s), eval_price_one_fewer(nets, 0.4, s));
}
