#pragma once

#include <cassert>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elbsde/errors.hpp"

namespace elbsde::nn {

/// Feature-major batch: one column per sample.
using Array = Eigen::ArrayXXd;

/// A trainable tensor and its gradient accumulator.
struct Param {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  explicit Param(Eigen::MatrixXd v = {}) : value(std::move(v)), grad(Eigen::MatrixXd::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Reverse-mode tape over batched arrays. Nodes are appended in evaluation order,
/// so a reverse sweep visits them in a valid topological order.
class Tape {
 public:
  enum class Op { Constant, Affine, Elu, Relu, Sqrt, Add, Sub, Mul, Scale, AddConst, MulConst, Row, Cols, Sum, Mean };

  Tape() { nodes_.reserve(2048); }

  Var constant(Array value) { return push(Op::Constant, std::move(value)); }

  /// Leaf whose gradient is kept, readable through grad() after backward().
  Var variable(Array value) {
    Var v = push(Op::Constant, std::move(value));
    nodes_.back().needs_grad = true;
    return v;
  }

  /// W x + b (b broadcast over columns).
  Var affine(Param& W, Param& b, Var x) {
    const Array& xv = value(x);
    if (W.value.cols() != xv.rows()) throw DimMismatch(W.value.cols(), xv.rows());
    Array y = ((W.value * xv.matrix()).colwise() + b.value.col(0)).array();
    Var out = push(Op::Affine, std::move(y), x.id);
    nodes_.back().W = &W;
    nodes_.back().b = &b;
    return out;
  }

  Var elu(Var x) {
    const Array& xv = value(x);
    return push(Op::Elu, xv.min(0.0).exp() - 1.0 + xv.max(0.0), x.id);
  }

  /// max(x, 0) with subgradient 0 at the kink.
  Var relu(Var x) { return push(Op::Relu, value(x).max(0.0), x.id); }

  /// sqrt(x + eps).
  Var sqrt(Var x, double eps = 0.0) {
    Var out = push(Op::Sqrt, (value(x) + eps).max(0.0).sqrt(), x.id);
    nodes_.back().scalar = eps;
    return out;
  }

  Var add(Var a, Var b) { return push(Op::Add, value(a) + value(b), a.id, b.id); }
  Var sub(Var a, Var b) { return push(Op::Sub, value(a) - value(b), a.id, b.id); }
  Var mul(Var a, Var b) { return push(Op::Mul, value(a) * value(b), a.id, b.id); }

  Var scale(Var a, double s) {
    Var out = push(Op::Scale, value(a) * s, a.id);
    nodes_.back().scalar = s;
    return out;
  }
  Var add_const(Var a, const Array& c) { return push(Op::AddConst, value(a) + c, a.id); }
  Var mul_const(Var a, const Array& c) {
    Var out = push(Op::MulConst, value(a) * c, a.id);
    nodes_.back().aux = c;
    return out;
  }

  Var row(Var a, int i) {
    Var out = push(Op::Row, value(a).row(i), a.id);
    nodes_.back().index = i;
    return out;
  }
  Var cols(Var a, int start, int count) {
    Var out = push(Op::Cols, value(a).middleCols(start, count), a.id);
    nodes_.back().index = start;
    return out;
  }

  Var sum(Var a) { return push(Op::Sum, Array::Constant(1, 1, value(a).sum()), a.id); }
  Var mean(Var a) { return push(Op::Mean, Array::Constant(1, 1, value(a).mean()), a.id); }

  const Array& value(Var v) const {
    assert(v.tape == this);
    return nodes_[v.id].value;
  }
  const Array& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulates d(loss)/d(param) into every Param reached from the 1x1 node `loss`.
  void backward(Var loss) {
    if (value(loss).size() != 1) throw DimMismatch(1, value(loss).size());
    for (auto& n : nodes_) n.grad.resize(0, 0);
    seed(loss.id).setConstant(1.0);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.size() == 0 || !n.needs_grad) continue;
      const bool g0 = n.in0 >= 0 && nodes_[n.in0].needs_grad;
      const bool g1 = n.in1 >= 0 && nodes_[n.in1].needs_grad;
      const Array& g = n.grad;
      switch (n.op) {
        case Op::Constant:
          break;
        case Op::Affine: {
          const Array& x = nodes_[n.in0].value;
          n.W->grad.noalias() += g.matrix() * x.matrix().transpose();
          n.b->grad.col(0) += g.matrix().rowwise().sum();
          if (g0) seed(n.in0).matrix().noalias() += n.W->value.transpose() * g.matrix();
          break;
        }
        case Op::Elu:
          // elu'(x) = 1 for x >= 0 and elu(x) + 1 otherwise
          if (g0) seed(n.in0) += g * (n.value.min(0.0) + 1.0);
          break;
        case Op::Relu:
          if (g0) seed(n.in0) += (nodes_[n.in0].value > 0.0).select(g, 0.0);
          break;
        case Op::Sqrt:
          if (g0) seed(n.in0) += (n.value > 0.0).select(0.5 * g / n.value, 0.0);
          break;
        case Op::Add:
          if (g0) seed(n.in0) += g;
          if (g1) seed(n.in1) += g;
          break;
        case Op::Sub:
          if (g0) seed(n.in0) += g;
          if (g1) seed(n.in1) -= g;
          break;
        case Op::Mul:
          if (g0) seed(n.in0) += g * nodes_[n.in1].value;
          if (g1) seed(n.in1) += g * nodes_[n.in0].value;
          break;
        case Op::Scale:
          if (g0) seed(n.in0) += g * n.scalar;
          break;
        case Op::AddConst:
          if (g0) seed(n.in0) += g;
          break;
        case Op::MulConst:
          if (g0) seed(n.in0) += g * n.aux;
          break;
        case Op::Row:
          if (g0) seed(n.in0).row(n.index) += g;
          break;
        case Op::Cols:
          if (g0) seed(n.in0).middleCols(n.index, g.cols()) += g;
          break;
        case Op::Sum:
          if (g0) seed(n.in0) += g(0, 0);
          break;
        case Op::Mean:
          if (g0) seed(n.in0) += g(0, 0) / static_cast<double>(nodes_[n.in0].value.size());
          break;
      }
    }
  }

 private:
  struct Node {
    Op op;
    Array value;
    Array grad;
    int in0 = -1;
    int in1 = -1;
    Param* W = nullptr;
    Param* b = nullptr;
    double scalar = 0.0;
    int index = 0;
    Array aux;
    bool needs_grad = false;
  };

  Var push(Op op, Array value, int in0 = -1, int in1 = -1) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.in0 = in0;
    n.in1 = in1;
    n.needs_grad = op == Op::Affine || (in0 >= 0 && nodes_[in0].needs_grad) || (in1 >= 0 && nodes_[in1].needs_grad);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Array& seed(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Array::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::vector<Node> nodes_;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator*(Var a, double s) { return a.tape->scale(a, s); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }
inline Var operator+(Var a, const Array& c) { return a.tape->add_const(a, c); }
inline Var operator*(Var a, const Array& c) { return a.tape->mul_const(a, c); }

}  // namespace elbsde::nn
