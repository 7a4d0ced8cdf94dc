#pragma once

#include <random>

#include "elbsde/model_params.hpp"
#include "elbsde/hedge.hpp"

namespace elbsde::testutil {

inline State random_state(std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  State s;
  s.x = -0.02 + 0.04 * u(eng);
  s.y = -0.02 + 0.04 * u(eng);
  s.f = 0.5 + u(eng);
  s.v = 0.01 + 0.2 * u(eng);
  s.lam = 0.005 + 0.02 * u(eng);
  s.k = 1 + static_cast<int>(150 * u(eng));
  return s;
}

inline Gradient5 random_gradient(std::mt19937_64& eng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {n(eng), n(eng), 10.0 * n(eng), n(eng), 50.0 * n(eng)};
}

inline double random_time(std::mt19937_64& eng, double T = 1.0) {
  return std::uniform_real_distribution<double>(0.0, 0.99 * T)(eng);
}

}  // namespace elbsde::testutil
