// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emgforge/tensor.hpp"

namespace emgforge::nn {

/// A named tensor with its gradient and Adam moments. Buffers (batch-norm
/// running statistics, input normalisation) are stored the same way with
/// `trainable = false` so they travel through checkpoints with the weights.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;
  bool trainable = true;
  bool has_grad = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> t, bool train = true)
      : name(std::move(n)), value(std::move(t)), grad(value.shape()), m(value.size(), T(0)),
        v(value.size(), T(0)), trainable(train) {}

  void zero_grad() {
    grad.fill(T(0));
    has_grad = false;
  }
  /// Adds `g` into the gradient and marks it populated.
  void accumulate(const Tensor<T>& g) {
    if (g.size() != value.size()) {
      throw ShapeError("parameter " + name + ": gradient size " + std::to_string(g.size()) +
                       " != " + std::to_string(value.size()));
    }
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    has_grad = true;
  }
  void reset_optimizer() {
    std::fill(m.begin(), m.end(), T(0));
    std::fill(v.begin(), v.end(), T(0));
    step = 0;
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  double eps = 1e-8;
};

/// Classic bias-corrected Adam; weight decay enters as an L2 term added to
/// the gradient before the moment updates. Throws StateError if a trainable
/// parameter has no gradient.
template <typename T>
void adam_step(std::vector<Parameter<T>>& params, const AdamConfig& cfg) {
  for (const auto& p : params) {
    if (p.trainable && !p.has_grad) throw StateError("adam_step: parameter " + p.name + " has no gradient");
  }
  for (auto& p : params) {
    if (!p.trainable) continue;
    p.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]) + cfg.weight_decay * p.value[i];
      const double m = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      p.m[i] = static_cast<T>(m);
      p.v[i] = static_cast<T>(v);
      const double update = cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
}

}  // namespace emgforge::nn
