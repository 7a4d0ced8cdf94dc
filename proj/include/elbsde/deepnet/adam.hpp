#pragma once

#include <cmath>
#include <vector>

#include "elbsde/deepnet/tape.hpp"

namespace elbsde::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
};

/// One bias-corrected Adam update of `params` using their accumulated gradients.
inline void adam_step(AdamState& st, const std::vector<Param*>& params) {
  if (st.m.empty()) {
    for (const Param* p : params) {
      st.m.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
      st.v.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (st.m.size() != params.size()) throw DimMismatch(st.m.size(), params.size());

  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (p.grad.rows() != st.m[i].rows() || p.grad.cols() != st.m[i].cols())
      throw DimMismatch(st.m[i].size(), p.grad.size());
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * p.grad;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= st.lr * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + st.eps);
  }
}

}  // namespace elbsde::nn
