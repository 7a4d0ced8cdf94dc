#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "elbsde/deepnet/mlp.hpp"

namespace elbsde::nn {

inline constexpr const char* kCheckpointHeader = "ELBSDE-CKPT v1";

/// 17 significant digits: parses back to the identical double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Checkpoint {
  Normalizer normalizer;
  std::vector<Mlp> nets;
};

// Layout:
//   ELBSDE-CKPT v1
//   normalizer <d>
//   lo <d values>
//   hi <d values>
//   network <name> <n_dims> <dims...>
//   W <rows> <cols>      followed by <rows> lines of <cols> values
//   b <rows>             followed by one line of <rows> values
//   ... one W/b pair per layer, then the next network ...
//   end
inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os << kCheckpointHeader << '\n';
  const auto& nz = ck.normalizer;
  os << "normalizer " << nz.dim() << '\n';
  for (const auto* vec : {&nz.lo, &nz.hi}) {
    os << (vec == &nz.lo ? "lo" : "hi");
    for (Eigen::Index i = 0; i < vec->size(); ++i) os << ' ' << format_double((*vec)[i]);
    os << '\n';
  }
  for (const auto& net : ck.nets) {
    os << "network " << net.name << ' ' << net.dims.size();
    for (int d : net.dims) os << ' ' << d;
    os << '\n';
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      const auto& W = net.weights[l].value;
      const auto& b = net.biases[l].value;
      os << "W " << W.rows() << ' ' << W.cols() << '\n';
      for (Eigen::Index i = 0; i < W.rows(); ++i) {
        for (Eigen::Index j = 0; j < W.cols(); ++j) os << (j ? " " : "") << format_double(W(i, j));
        os << '\n';
      }
      os << "b " << b.rows() << '\n';
      for (Eigen::Index i = 0; i < b.rows(); ++i) os << (i ? " " : "") << format_double(b(i, 0));
      os << '\n';
    }
  }
  os << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& is) {
  auto fail = [](const std::string& why) -> Error { return Error("malformed checkpoint: " + why); };
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointHeader) throw fail("bad header");

  auto expect = [&](const std::string& word) {
    std::string w;
    if (!(is >> w) || w != word) throw fail("expected '" + word + "'");
  };
  auto read_double = [&]() {
    std::string tok;
    if (!(is >> tok)) throw fail("truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw fail("bad number '" + tok + "'");
    return v;
  };
  auto read_int = [&]() {
    long v;
    if (!(is >> v)) throw fail("expected integer");
    return static_cast<int>(v);
  };

  Checkpoint ck;
  expect("normalizer");
  const int d = read_int();
  ck.normalizer.lo.resize(d);
  ck.normalizer.hi.resize(d);
  expect("lo");
  for (int i = 0; i < d; ++i) ck.normalizer.lo[i] = read_double();
  expect("hi");
  for (int i = 0; i < d; ++i) ck.normalizer.hi[i] = read_double();

  std::string word;
  while (is >> word) {
    if (word == "end") return ck;
    if (word != "network") throw fail("expected 'network' or 'end'");
    std::string name;
    is >> name;
    const int nd = read_int();
    std::vector<int> dims(nd);
    for (auto& x : dims) x = read_int();
    Mlp net(name, dims);
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      expect("W");
      if (read_int() != dims[l + 1] || read_int() != dims[l]) throw fail("weight shape");
      auto& W = net.weights[l].value;
      for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = read_double();
      expect("b");
      if (read_int() != dims[l + 1]) throw fail("bias shape");
      auto& b = net.biases[l].value;
      for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 0) = read_double();
    }
    ck.nets.push_back(std::move(net));
  }
  throw fail("missing 'end'");
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write checkpoint: " + path);
  write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingCheckpoint(path);
  return read_checkpoint(is);
}

}  // namespace elbsde::nn
