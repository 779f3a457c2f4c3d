// Finite-difference gradient checks shared by the op tests and the
// acceptance binary. Everything runs in double.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "emgforge/forcenet.hpp"
#include "emgforge/ops.hpp"

namespace gradcheck {

using emgforge::nn::Shape;
using Tensor = emgforge::nn::Tensor<double>;

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-4;

struct Result {
  std::string name;
  double rel_error = 0.0;
};

// ||a - b|| / max(||a|| + ||b||, 1e-5); the floor absorbs roundoff on exactly-zero gradients
// such as a conv bias that feeds batch normalisation
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-5);
}

// Values bounded away from zero so relu/maxpool kinks are not crossed by the step.
inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> mag(0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(shape);
  for (auto& v : t.vec()) v = scale * (sign(rng) ? mag(rng) : -mag(rng));
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central differences of `loss` with respect to every entry of `x`.
inline std::vector<double> numeric_grad(Tensor& x, const std::function<double()>& loss) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + kStep;
    const double up = loss();
    x[i] = saved - kStep;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * kStep);
  }
  return g;
}

// Checks every op on random inputs with loss = sum(r * op(x)).
inline std::vector<Result> check_ops(std::uint64_t seed) {
  namespace nn = emgforge::nn;
  std::mt19937_64 rng(seed);
  std::vector<Result> out;
  const Shape xs{2, 3, 4, 6};

  {
    Tensor x = random_tensor(xs, rng), w = random_tensor({4, 3, 3, 3}, rng, 0.5), b = random_tensor({4}, rng);
    const Tensor r = random_tensor({2, 4, 4, 6}, rng);
    auto loss = [&] { return dot(r, nn::conv2d(x, w, b)); };
    const auto g = nn::conv2d_backward(x, w, r);
    out.push_back({"conv2d/input", rel_error(g.input.vec(), numeric_grad(x, loss))});
    out.push_back({"conv2d/weight", rel_error(g.weight.vec(), numeric_grad(w, loss))});
    out.push_back({"conv2d/bias", rel_error(g.bias.vec(), numeric_grad(b, loss))});
  }
  {
    Tensor x = random_tensor(xs, rng), gamma = random_tensor({3}, rng), beta = random_tensor({3}, rng);
    const Tensor r = random_tensor(xs, rng);
    auto loss = [&] {
      Tensor rm({3}), rv({3}, 1.0);
      return dot(r, nn::batchnorm2d_train(x, gamma, beta, rm, rv));
    };
    Tensor rm({3}), rv({3}, 1.0);
    nn::BatchNormCache<double> cache;
    nn::batchnorm2d_train(x, gamma, beta, rm, rv, &cache);
    const auto g = nn::batchnorm2d_backward(cache, gamma, r);
    out.push_back({"batchnorm/input", rel_error(g.input.vec(), numeric_grad(x, loss))});
    out.push_back({"batchnorm/gamma", rel_error(g.gamma.vec(), numeric_grad(gamma, loss))});
    out.push_back({"batchnorm/beta", rel_error(g.beta.vec(), numeric_grad(beta, loss))});
  }
  {
    Tensor x = random_tensor(xs, rng);
    const Tensor r = random_tensor(xs, rng);
    auto loss = [&] { return dot(r, nn::relu(x)); };
    const auto g = nn::relu_backward(nn::relu(x), r);
    out.push_back({"relu", rel_error(g.vec(), numeric_grad(x, loss))});
  }
  {
    Tensor x = random_tensor(xs, rng);
    const Tensor r = random_tensor({2, 3, 2, 3}, rng);
    auto loss = [&] { return dot(r, nn::maxpool2x2(x)); };
    std::vector<std::uint32_t> argmax;
    nn::maxpool2x2(x, &argmax);
    const auto g = nn::maxpool2x2_backward(xs, argmax, r);
    out.push_back({"maxpool2x2", rel_error(g.vec(), numeric_grad(x, loss))});
  }
  {
    Tensor x = random_tensor(xs, rng);
    const Tensor r = random_tensor({2, 3, 8, 6}, rng);
    auto loss = [&] { return dot(r, nn::upsample_bilinear_time(x)); };
    const auto g = nn::upsample_bilinear_time_backward(xs, r);
    out.push_back({"upsample_time", rel_error(g.vec(), numeric_grad(x, loss))});
  }
  {
    Tensor x = random_tensor(xs, rng);
    const Tensor r = random_tensor({2, 3, 4, 1}, rng);
    auto loss = [&] { return dot(r, nn::mean_freq(x)); };
    const auto g = nn::mean_freq_backward(xs, r);
    out.push_back({"mean_freq", rel_error(g.vec(), numeric_grad(x, loss))});
  }
  {
    Tensor x = random_tensor({2, 3, 4, 1}, rng), w = random_tensor({5, 3}, rng), b = random_tensor({5}, rng);
    const Tensor r = random_tensor({2, 5, 4, 1}, rng);
    auto loss = [&] { return dot(r, nn::linear_channels(x, w, b)); };
    const auto g = nn::linear_channels_backward(x, w, r);
    out.push_back({"linear/input", rel_error(g.input.vec(), numeric_grad(x, loss))});
    out.push_back({"linear/weight", rel_error(g.weight.vec(), numeric_grad(w, loss))});
    out.push_back({"linear/bias", rel_error(g.bias.vec(), numeric_grad(b, loss))});
  }
  {
    Tensor x = random_tensor(xs, rng, 3.0);
    const Tensor r = random_tensor(xs, rng);
    auto loss = [&] { return dot(r, nn::sigmoid(x)); };
    const auto g = nn::sigmoid_backward(nn::sigmoid(x), r);
    out.push_back({"sigmoid", rel_error(g.vec(), numeric_grad(x, loss))});
  }
  {
    // joint loss as a function of the logits
    Tensor z = random_tensor({2, 5, 4}, rng, 2.0);
    std::vector<std::uint8_t> y(z.size());
    std::vector<double> force(z.size());
    std::uniform_real_distribution<double> f(0.0, 30.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      force[i] = f(rng);
      y[i] = emgforge::force_label(force[i]);
    }
    auto loss = [&] {
      const Tensor p = nn::sigmoid(z);
      return emgforge::joint_loss<double>(p.vec(), y, force, 30.0, 1.0).total;
    };
    const Tensor p = nn::sigmoid(z);
    std::vector<double> grad(z.size());
    emgforge::joint_loss<double>(p.vec(), y, force, 30.0, 1.0, {}, grad);
    out.push_back({"joint_loss/logits", rel_error(grad, numeric_grad(z, loss))});
  }
  for (auto kind : {emgforge::RegressionKind::l1, emgforge::RegressionKind::l2}) {
    // keep every residual at least 0.05 away from the l1 kink
    Tensor pred = random_tensor({2, 5, 4}, rng);
    std::vector<double> force(pred.size());
    std::uniform_real_distribution<double> f(0.0, 30.0);
    for (std::size_t k = 0; k < force.size(); ++k) {
      force[k] = f(rng);
      pred[k] += force[k] / 30.0;
    }
    auto loss = [&] { return emgforge::regression_only_loss<double>(pred.vec(), force, 30.0, kind); };
    std::vector<double> grad(pred.size());
    emgforge::regression_only_loss<double>(pred.vec(), force, 30.0, kind, grad);
    out.push_back({kind == emgforge::RegressionKind::l1 ? "l1_loss" : "l2_loss",
                   rel_error(grad, numeric_grad(pred, loss))});
  }
  return out;
}

inline emgforge::ForceNetConfig tiny_config() {
  emgforge::ForceNetConfig cfg;
  cfg.encoder_widths = {4, 8};
  cfg.decoder_widths = {8, 4};
  cfg.seq_len = 8;
  cfg.bins = 8;
  return cfg;
}

// Whole-network check: joint loss through a train-mode forward pass, against
// every trainable parameter and the input.
inline std::vector<Result> check_network(std::uint64_t seed) {
  using Net = emgforge::ForceNetT<double>;
  const auto cfg = tiny_config();
  Net net(cfg, seed);
  std::mt19937_64 rng(seed + 1000);
  Tensor x = random_tensor({2, cfg.in_channels, cfg.seq_len, cfg.bins}, rng);
  const std::size_t n = 2 * cfg.outputs * cfg.seq_len;
  std::vector<std::uint8_t> y(n);
  std::vector<double> force(n);
  std::uniform_real_distribution<double> f(0.0, 30.0);
  for (std::size_t i = 0; i < n; ++i) {
    force[i] = f(rng) < 12.0 ? 0.0 : f(rng);
    y[i] = emgforge::force_label(force[i]);
  }
  auto loss = [&] {
    const Tensor p = emgforge::nn::sigmoid(net.forward_logits(x, emgforge::Mode::train));
    return emgforge::joint_loss<double>(p.vec(), y, force, cfg.f_max, cfg.lambda).total;
  };

  emgforge::ForwardTape<double> tape;
  const Tensor logits = net.forward_logits(x, emgforge::Mode::train, &tape);
  const Tensor p = emgforge::nn::sigmoid(logits);
  Tensor grad_logits(logits.shape());
  emgforge::joint_loss<double>(p.vec(), y, force, cfg.f_max, cfg.lambda, {}, grad_logits.span());
  net.zero_grad();
  net.backward(tape, grad_logits);
  const Tensor grad_x = net.backward_input(tape, grad_logits);

  std::vector<Result> out;
  for (auto& param : net.params()) {
    if (!param.trainable) continue;
    const std::vector<double> analytic = param.grad.vec();
    out.push_back({"net/" + param.name, rel_error(analytic, numeric_grad(param.value, loss))});
  }
  out.push_back({"net/input", rel_error(grad_x.vec(), numeric_grad(x, loss))});
  return out;
}

}  // namespace gradcheck
