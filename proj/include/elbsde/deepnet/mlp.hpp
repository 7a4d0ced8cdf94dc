#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "elbsde/deepnet/tape.hpp"

namespace elbsde::nn {

inline double elu(double z) { return z >= 0.0 ? z : std::expm1(z); }

/// Fully connected network: affine layers with ELU between them and a linear output.
struct Mlp {
  std::string name;
  std::vector<int> dims;  // d_in, hidden..., d_out
  std::vector<Param> weights;
  std::vector<Param> biases;

  Mlp() = default;
  Mlp(std::string n, std::vector<int> d) : name(std::move(n)), dims(std::move(d)) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      weights.emplace_back(Eigen::MatrixXd::Zero(dims[l + 1], dims[l]));
      biases.emplace_back(Eigen::MatrixXd::Zero(dims[l + 1], 1));
    }
  }

  int d_in() const { return dims.front(); }
  int d_out() const { return dims.back(); }
  std::size_t n_layers() const { return weights.size(); }

  std::size_t n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < n_layers(); ++l) n += weights[l].value.size() + biases[l].value.size();
    return n;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      out.push_back(&weights[l]);
      out.push_back(&biases[l]);
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < n_layers(); ++l)
      if (!weights[l].value.allFinite() || !biases[l].value.allFinite()) return false;
    return true;
  }
};

/// Glorot-uniform weights on every layer feeding a hidden unit; the output layer starts at zero.
inline void init_glorot(Mlp& net, std::mt19937_64& eng) {
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    auto& W = net.weights[l].value;
    net.biases[l].value.setZero();
    if (l + 1 == net.n_layers()) {
      W.setZero();
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = dist(eng);
  }
}

/// Batched evaluation; x holds one sample per column.
inline Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x) {
  if (x.rows() != net.d_in()) throw DimMismatch(net.d_in(), x.rows());
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    Eigen::MatrixXd z = (net.weights[l].value * h).colwise() + net.biases[l].value.col(0);
    if (l + 1 < net.n_layers()) z = (z.array().min(0.0).exp() - 1.0 + z.array().max(0.0)).matrix();
    h = std::move(z);
  }
  return h;
}

inline Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& x) {
  return forward(net, Eigen::MatrixXd(x)).col(0);
}

/// Records the evaluation of `net` on the tape.
inline Var forward(Tape& tape, Mlp& net, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    h = tape.affine(net.weights[l], net.biases[l], h);
    if (l + 1 < net.n_layers()) h = tape.elu(h);
  }
  return h;
}

/// Per-feature min-max scaling onto [-1, 1]; values outside the range are not clamped.
struct Normalizer {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() != hi.size()) throw DimMismatch(lo.size(), hi.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(hi[i] > lo[i])) throw InvariantViolation("normalizer", "need hi > lo for every feature");
  }

  double normalize(double x, int i) const { return 2.0 * (x - lo[i]) / (hi[i] - lo[i]) - 1.0; }
  double denormalize(double g, int i) const { return lo[i] + 0.5 * (g + 1.0) * (hi[i] - lo[i]); }

  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
    if (x.size() != lo.size()) throw DimMismatch(lo.size(), x.size());
    return (2.0 * (x - lo).array() / (hi - lo).array() - 1.0).matrix();
  }

  bool operator==(const Normalizer& o) const { return lo == o.lo && hi == o.hi; }
};

}  // namespace elbsde::nn
