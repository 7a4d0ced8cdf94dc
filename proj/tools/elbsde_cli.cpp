// Command-line front end: train, price, surface, sensitivity, validate-bel, validate-gmmb, simulate.

#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "elbsde/config.hpp"
#include "elbsde/csv.hpp"

namespace fs = std::filesystem;
using namespace elbsde;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kNumericError = 3, kMissingArtifact = 4 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> checkpoint;
  std::string bump_target = "rho_xf";
  std::optional<std::string> feature1, feature2;
  std::optional<int> grid_points;
  int sim_paths = 100;
  bool quiet = false;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  if (o.feature1) cfg.grid_feature1 = *o.feature1;
  if (o.feature2) cfg.grid_feature2 = *o.feature2;
  if (o.grid_points) cfg.grid_points = *o.grid_points;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

TrainResult run_training(const TrainConfig& tc, const ModelParams& p, bool quiet, const std::string& label) {
  return train(tc, p, [&](int epoch, double mse, double price) {
    if (!quiet && (epoch % 10 == 9 || epoch + 1 == tc.epochs))
      std::fprintf(stderr, "[%s] epoch %d  mse %.6g  price %.6f\n", label.c_str(), epoch + 1, mse, price);
  });
}

double trained_price(const TrainConfig& tc, const ModelParams& p, bool quiet, const std::string& label) {
  return price_at_zero(run_training(tc, p, quiet, label).nets, tc.base).value;
}

double rel_error(double v, double ref) { return std::abs(v - ref) / std::abs(ref); }

int cmd_train(const RunConfig& cfg, const Options& o) {
  const TrainResult res = run_training(cfg.train, cfg.model, o.quiet, "train");
  fs::create_directories(fs::path(cfg.checkpoint).parent_path().empty() ? "." : fs::path(cfg.checkpoint).parent_path());
  nn::save_checkpoint(cfg.checkpoint, res.nets.to_checkpoint());
  CsvWriter csv(out_path(cfg, "train_report.csv"), {"epoch", "mse", "base_price"});
  for (std::size_t e = 0; e < res.report.mse.size(); ++e)
    csv.row({static_cast<long>(e + 1), res.report.mse[e], res.report.base_price[e]});
  const double price = price_at_zero(res.nets, cfg.train.base).value;
  std::printf("price %s\n", nn::format_double(price).c_str());
  return kOk;
}

NetworkSet load_nets(const RunConfig& cfg) { return NetworkSet::from_checkpoint(nn::load_checkpoint(cfg.checkpoint)); }

int cmd_price(const RunConfig& cfg, const Options&) {
  const NetworkSet nets = load_nets(cfg);
  const PriceAtZero pz = price_at_zero(nets, cfg.train.base);
  if (pz.outside_region) std::fprintf(stderr, "warning: state lies outside the trained region\n");
  std::printf("price %s\n", nn::format_double(pz.value).c_str());
  return kOk;
}

int cmd_surface(const RunConfig& cfg, const Options&) {
  const NetworkSet nets = load_nets(cfg);
  const Interval r1 = region_range(cfg.train.region, cfg.grid_feature1);
  const Interval r2 = region_range(cfg.train.region, cfg.grid_feature2);
  if (r1.lo == r1.hi || r2.lo == r2.hi)
    std::fprintf(stderr, "warning: the training region is a single point along a grid feature; use region = surface\n");
  const int n = cfg.grid_points;
  CsvWriter csv(out_path(cfg, "surface.csv"), {cfg.grid_feature1, cfg.grid_feature2, "price"});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = r1.lo + (r1.hi - r1.lo) * i / (n - 1);
      const double b = r2.lo + (r2.hi - r2.lo) * j / (n - 1);
      State s = cfg.train.base;
      set_state_feature(s, cfg.grid_feature1, a);
      set_state_feature(s, cfg.grid_feature2, b);
      csv.row({a, b, price_at_zero(nets, s).value});
    }
  std::printf("wrote %s\n", out_path(cfg, "surface.csv").c_str());
  return kOk;
}

int corr_index(const std::string& name, int& i, int& j) {
  const std::string f = "xyfv";
  if (name.size() != 6 || name.rfind("rho_", 0) != 0) return -1;
  const auto a = f.find(name[4]), b = f.find(name[5]);
  if (a == std::string::npos || b == std::string::npos || a == b) return -1;
  i = static_cast<int>(a);
  j = static_cast<int>(b);
  return 0;
}

// Every variant retrains from the same seed, so the pool shares its random draws.
int cmd_sensitivity(const RunConfig& cfg, const Options& o) {
  const double base = trained_price(cfg.train, cfg.model, o.quiet, "base");
  CsvWriter csv(out_path(cfg, "sensitivity.csv"), {"parameter", "value", "price", "pct_change"});
  auto report = [&](const std::string& name, double value, double price) {
    const double pct = 100.0 * (price - base) / base;
    csv.row({name, value, price, pct});
    std::printf("%s = %s  price %s  change %+.4f%%\n", name.c_str(), nn::format_double(value).c_str(),
                nn::format_double(price).c_str(), pct);
  };
  csv.row({std::string("base"), 0.0, base, 0.0});

  if (o.bump_target == "alpha") {
    for (double a : cfg.alpha_sweep) {
      ModelParams p = cfg.model;
      p.alpha = a;
      const double price =
          a == cfg.model.alpha ? base : trained_price(cfg.train, p, o.quiet, "alpha");
      report("alpha", a, price);
    }
    return kOk;
  }
  int i = 0, j = 0;
  if (corr_index(o.bump_target, i, j) != 0)
    throw InvariantViolation("bump", "expected rho_<ab> with a, b in {x, y, f, v}, or alpha");
  for (double sign : {+1.0, -1.0}) {
    ModelParams p = cfg.model;
    const double v = p.corr(i, j) + sign * cfg.bump;
    p.corr(i, j) = p.corr(j, i) = v;
    p.validate();
    report(o.bump_target, v, trained_price(cfg.train, p, o.quiet, o.bump_target));
  }
  return kOk;
}

int cmd_validate_bel(const RunConfig& cfg, const Options& o) {
  ModelParams p = cfg.model;
  p.alpha = 0.0;
  const McEstimate mc = bel_monte_carlo(p, cfg.train.base, cfg.bel_sims, cfg.train.grid, cfg.train.seed);
  const double nn_price = o.checkpoint ? price_at_zero(load_nets(cfg), cfg.train.base).value
                                       : trained_price(cfg.train, p, o.quiet, "bel");
  const double err = rel_error(nn_price, mc.mean);
  std::printf("oracle %s (se %s)\nneural %s\nrelative error %.6f\n", nn::format_double(mc.mean).c_str(),
              nn::format_double(mc.std_error).c_str(), nn::format_double(nn_price).c_str(), err);
  CsvWriter csv(out_path(cfg, "validate_bel.csv"), {"oracle", "oracle_se", "n_sims", "neural", "rel_error"});
  csv.row({mc.mean, mc.std_error, mc.n_sims, nn_price, err});
  return kOk;
}

int cmd_validate_gmmb(const RunConfig& cfg, const Options& o) {
  const GmmbParams& g = cfg.gmmb;
  const double semi = gmmb_price_semi_analytic(g);
  const McEstimate mc = gmmb_price_monte_carlo(g, cfg.gmmb_sims, cfg.train.seed);
  const ModelParams p = gmmb_model(g);
  const State s0 = gmmb_state(g);
  double nn_price;
  if (o.checkpoint) {
    nn_price = price_at_zero(load_nets(cfg), s0).value;
  } else {
    TrainConfig tc = cfg.train;
    tc.base = s0;
    tc.region = InitRegion::point(s0);
    tc.grid = GridSpec::from_step(g.T, cfg.train.grid.dt);
    nn_price = trained_price(tc, p, o.quiet, "gmmb");
  }
  const double err = rel_error(nn_price, semi);
  std::printf("oracle %s\nmonte carlo %s (se %s)\nneural %s\nrelative error %.6f\n", nn::format_double(semi).c_str(),
              nn::format_double(mc.mean).c_str(), nn::format_double(mc.std_error).c_str(),
              nn::format_double(nn_price).c_str(), err);
  CsvWriter csv(out_path(cfg, "validate_gmmb.csv"), {"oracle", "mc", "mc_se", "n_sims", "neural", "rel_error"});
  csv.row({semi, mc.mean, mc.std_error, mc.n_sims, nn_price, err});
  return kOk;
}

int cmd_simulate(const RunConfig& cfg, const Options& o) {
  auto eng = substream(cfg.train.seed, 0, detail::kTagInitStates);
  const auto init = sample_initial_states(cfg.train.region, o.sim_paths, eng);
  const PathBundle pb = simulate_paths(cfg.model, cfg.train.grid, init, Measure::RiskAdjusted, cfg.train.seed);
  CsvWriter csv(out_path(cfg, "paths.csv"), {"path", "step", "t", "x", "y", "F", "v", "lambda", "J"});
  for (int i = 0; i < pb.n_paths; ++i)
    for (int n = 0; n <= pb.n_steps; ++n) {
      const State& s = pb.state(i, n);
      csv.row({long{i}, long{n}, cfg.train.grid.time(n), s.x, s.y, s.f, s.v, s.lam, long{s.k}});
    }
  std::printf("wrote %s\n", out_path(cfg, "paths.csv").c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large tape buffers on the heap between batches instead of mapping fresh pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);

  CLI::App app{"Deep BSDE pricing of equity-linked life insurance portfolios"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  std::string out, ckpt, f1, f2;
  int points = 0;
  app.add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* ckpt_opt = app.add_option("--checkpoint", ckpt, "checkpoint path");
  app.add_flag("--quiet", o.quiet, "no per-epoch progress");

  app.add_subcommand("train", "train the networks, write checkpoint and report");
  app.add_subcommand("price", "price at the configured base state from a checkpoint");
  auto* surface = app.add_subcommand("surface", "price surface over two initial-state features");
  auto* f1_opt = surface->add_option("--grid-feature1", f1, "x0, y0, F0, v0, lambda0 or J0");
  auto* f2_opt = surface->add_option("--grid-feature2", f2, "second feature");
  auto* pts_opt = surface->add_option("--grid-points", points, "points per axis");
  auto* sens = app.add_subcommand("sensitivity", "retrain under a correlation bump or over the alpha sweep");
  sens->add_option("--bump", o.bump_target, "rho_<ab> (a, b in x, y, f, v) or alpha")->capture_default_str();
  app.add_subcommand("validate-bel", "compare the alpha = 0 price with Monte Carlo");
  app.add_subcommand("validate-gmmb", "compare the GMMB price with the semi-analytic oracle");
  auto* sim = app.add_subcommand("simulate", "dump simulated paths");
  sim->add_option("--paths", o.sim_paths, "number of paths")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (*seed_opt) o.seed = seed;
  if (*out_opt) o.out_dir = out;
  if (*ckpt_opt) o.checkpoint = ckpt;
  if (*f1_opt) o.feature1 = f1;
  if (*f2_opt) o.feature2 = f2;
  if (*pts_opt) o.grid_points = points;

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = resolve_config(o);
    if (cmd == "train") return cmd_train(cfg, o);
    if (cmd == "price") return cmd_price(cfg, o);
    if (cmd == "surface") return cmd_surface(cfg, o);
    if (cmd == "sensitivity") return cmd_sensitivity(cfg, o);
    if (cmd == "validate-bel") return cmd_validate_bel(cfg, o);
    if (cmd == "validate-gmmb") return cmd_validate_gmmb(cfg, o);
    if (cmd == "simulate") return cmd_simulate(cfg, o);
    throw UnknownCommand(cmd);
  } catch (const MissingCheckpoint& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMissingArtifact;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const UnknownCommand& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kNumericError;
  }
}
