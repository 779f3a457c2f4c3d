// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/forcenet.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

#include "emgforge/error.hpp"

namespace emgforge {

using nn::Shape;
using nn::Tensor;

void ForceNetConfig::validate() const {
  if (encoder_widths.size() != decoder_widths.size()) {
    throw ConfigError("forcenet: encoder depth " + std::to_string(encoder_widths.size()) +
                      " != decoder depth " + std::to_string(decoder_widths.size()));
  }
  if (in_channels == 0 || outputs == 0) throw ConfigError("forcenet: channel counts must be positive");
  const std::size_t scale = std::size_t{1} << encoder_widths.size();
  if (seq_len == 0 || seq_len % scale != 0) {
    throw ConfigError("forcenet: seq_len " + std::to_string(seq_len) + " not divisible by " +
                      std::to_string(scale));
  }
  if (bins == 0 || bins % scale != 0) {
    throw ConfigError("forcenet: bins " + std::to_string(bins) + " not divisible by " +
                      std::to_string(scale));
  }
  for (auto w : encoder_widths) {
    if (w == 0) throw ConfigError("forcenet: zero encoder width");
  }
  for (auto w : decoder_widths) {
    if (w == 0) throw ConfigError("forcenet: zero decoder width");
  }
  if (!(f_max > 0.0)) throw ConfigError("forcenet: f_max must be positive");
  if (lambda < 0.0) throw ConfigError("forcenet: lambda must be >= 0");
}

std::string ForceNetConfig::to_json() const {
  nlohmann::json j;
  j["in_channels"] = in_channels;
  j["seq_len"] = seq_len;
  j["bins"] = bins;
  j["encoder_widths"] = encoder_widths;
  j["decoder_widths"] = decoder_widths;
  j["outputs"] = outputs;
  j["f_max"] = f_max;
  j["lambda"] = lambda;
  j["head"] = head == HeadKind::sigmoid ? "sigmoid" : "linear";
  j["task"] = task == Task::force ? "force" : "tap";
  j["calibrated"] = calibrated;
  return j.dump();
}

ForceNetConfig ForceNetConfig::from_json(const std::string& text) {
  ForceNetConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.bins = j.at("bins").get<std::size_t>();
    c.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
    c.decoder_widths = j.at("decoder_widths").get<std::vector<std::size_t>>();
    c.outputs = j.at("outputs").get<std::size_t>();
    c.f_max = j.at("f_max").get<double>();
    c.lambda = j.at("lambda").get<double>();
    const auto head = j.at("head").get<std::string>();
    if (head != "sigmoid" && head != "linear") throw FormatError("model config: bad head '" + head + "'");
    c.head = head == "sigmoid" ? HeadKind::sigmoid : HeadKind::linear;
    const auto task = j.at("task").get<std::string>();
    if (task != "force" && task != "tap") throw FormatError("model config: bad task '" + task + "'");
    c.task = task == "force" ? Task::force : Task::tap;
    c.calibrated = j.value("calibrated", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
ForceNetT<T>::ForceNetT(ForceNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::size_t cin = config_.in_channels;
  for (std::size_t i = 0; i < config_.encoder_widths.size(); ++i) {
    encoder_.push_back(add_block("enc" + std::to_string(i), cin, config_.encoder_widths[i], rng));
    cin = config_.encoder_widths[i];
  }
  for (std::size_t i = 0; i < config_.decoder_widths.size(); ++i) {
    decoder_.push_back(add_block("dec" + std::to_string(i), cin, config_.decoder_widths[i], rng));
    cin = config_.decoder_widths[i];
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(cin));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> hw({config_.outputs, cin});
  for (auto& v : hw.vec()) v = static_cast<T>(u(rng));
  head_weight_ = add_param("head.weight", std::move(hw), true);
  head_bias_ = add_param("head.bias", Tensor<T>({config_.outputs}), true);
  input_mean_ = add_param("input.mean", Tensor<T>({config_.in_channels}, T(0)), false);
  input_std_ = add_param("input.std", Tensor<T>({config_.in_channels}, T(1)), false);
}

template <typename T>
std::size_t ForceNetT<T>::add_param(std::string name, Tensor<T> value, bool trainable) {
  params_.emplace_back(std::move(name), std::move(value), trainable);
  return params_.size() - 1;
}

template <typename T>
typename ForceNetT<T>::ConvBlockIdx ForceNetT<T>::add_block(const std::string& prefix, std::size_t cin,
                                                            std::size_t cout, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(cin * 9));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> w({cout, cin, 3, 3});
  for (auto& v : w.vec()) v = static_cast<T>(u(rng));
  ConvBlockIdx idx{};
  idx.weight = add_param(prefix + ".conv.weight", std::move(w), true);
  idx.bias = add_param(prefix + ".conv.bias", Tensor<T>({cout}), true);
  idx.gamma = add_param(prefix + ".bn.gamma", Tensor<T>({cout}, T(1)), true);
  idx.beta = add_param(prefix + ".bn.beta", Tensor<T>({cout}), true);
  idx.running_mean = add_param(prefix + ".bn.running_mean", Tensor<T>({cout}), false);
  idx.running_var = add_param(prefix + ".bn.running_var", Tensor<T>({cout}, T(1)), false);
  return idx;
}

template <typename T>
nn::Parameter<T>& ForceNetT<T>::param(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw InvalidArgument("forcenet: no parameter named " + name);
}

template <typename T>
const nn::Parameter<T>& ForceNetT<T>::param(const std::string& name) const {
  return const_cast<ForceNetT*>(this)->param(name);
}

template <typename T>
Tensor<T> ForceNetT<T>::forward_logits(const Tensor<T>& input, Mode mode, ForwardTape<T>* tape) {
  nn::require_rank(input, 4, "forcenet input");
  const Shape want{input.dim(0), config_.in_channels, config_.seq_len, config_.bins};
  if (input.shape() != want) {
    throw ShapeError("forcenet: input shape " + nn::shape_str(input.shape()) + ", expected " +
                     nn::shape_str(want));
  }
  if (tape != nullptr && mode != Mode::train) throw StateError("forcenet: tape requires train mode");
  if (tape != nullptr) {
    tape->encoder.assign(encoder_.size(), {});
    tape->decoder.assign(decoder_.size(), {});
  }

  auto conv_bn_relu = [&](const ConvBlockIdx& b, Tensor<T> x, typename ForwardTape<T>::Block* rec) {
    Tensor<T> y = nn::conv2d(x, params_[b.weight].value, params_[b.bias].value);
    if (mode == Mode::train) {
      y = nn::batchnorm2d_train(y, params_[b.gamma].value, params_[b.beta].value,
                                params_[b.running_mean].value, params_[b.running_var].value,
                                rec != nullptr ? &rec->bn : nullptr);
    } else {
      y = nn::batchnorm2d_eval(y, params_[b.gamma].value, params_[b.beta].value,
                               params_[b.running_mean].value, params_[b.running_var].value);
    }
    y = nn::relu(y);
    if (rec != nullptr) {
      rec->conv_in = std::move(x);
      rec->relu_out = y;
    }
    return y;
  };

  Tensor<T> x = input;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    auto* rec = tape != nullptr ? &tape->encoder[i] : nullptr;
    Tensor<T> y = conv_bn_relu(encoder_[i], std::move(x), rec);
    x = nn::maxpool2x2(y, rec != nullptr ? &rec->pool_argmax : nullptr);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    auto* rec = tape != nullptr ? &tape->decoder[i] : nullptr;
    x = nn::upsample_bilinear_time(conv_bn_relu(decoder_[i], std::move(x), rec));
  }
  if (tape != nullptr) tape->pooled_input_shape = x.shape();
  x = nn::mean_freq(x);
  Tensor<T> z = nn::linear_channels(x, params_[head_weight_].value, params_[head_bias_].value);
  if (tape != nullptr) tape->head_in = std::move(x);
  return Tensor<T>({z.dim(0), z.dim(1), z.dim(2)}, std::move(z.vec()));
}

template <typename T>
Tensor<T> ForceNetT<T>::forward(const Tensor<T>& input, Mode mode) {
  Tensor<T> z = forward_logits(input, mode);
  return config_.head == HeadKind::sigmoid ? nn::sigmoid(z) : z;
}

template <typename T>
Tensor<T> ForceNetT<T>::run_backward(const ForwardTape<T>& tape, const Tensor<T>& grad_logits,
                                     bool accumulate_params) {
  const Shape& hin = tape.head_in.shape();
  if (grad_logits.shape() != Shape{hin[0], config_.outputs, hin[2]}) {
    throw ShapeError("forcenet backward: grad shape " + nn::shape_str(grad_logits.shape()));
  }
  Tensor<T> dz({hin[0], config_.outputs, hin[2], 1}, grad_logits.vec());
  auto lin = nn::linear_channels_backward(tape.head_in, params_[head_weight_].value, dz);
  if (accumulate_params) {
    params_[head_weight_].accumulate(lin.weight);
    params_[head_bias_].accumulate(lin.bias);
  }
  Tensor<T> dx = nn::mean_freq_backward(tape.pooled_input_shape, lin.input);

  auto block_backward = [&](const ConvBlockIdx& b, const typename ForwardTape<T>::Block& rec,
                            Tensor<T> dy) {
    dy = nn::relu_backward(rec.relu_out, dy);
    auto bn = nn::batchnorm2d_backward(rec.bn, params_[b.gamma].value, dy);
    auto conv = nn::conv2d_backward(rec.conv_in, params_[b.weight].value, bn.input);
    if (accumulate_params) {
      params_[b.gamma].accumulate(bn.gamma);
      params_[b.beta].accumulate(bn.beta);
      params_[b.weight].accumulate(conv.weight);
      params_[b.bias].accumulate(conv.bias);
    }
    return std::move(conv.input);
  };

  for (std::size_t i = decoder_.size(); i-- > 0;) {
    const auto& rec = tape.decoder[i];
    dx = nn::upsample_bilinear_time_backward(rec.relu_out.shape(), dx);
    dx = block_backward(decoder_[i], rec, std::move(dx));
  }
  for (std::size_t i = encoder_.size(); i-- > 0;) {
    const auto& rec = tape.encoder[i];
    dx = nn::maxpool2x2_backward(rec.relu_out.shape(), rec.pool_argmax, dx);
    dx = block_backward(encoder_[i], rec, std::move(dx));
  }
  return dx;
}

template <typename T>
void ForceNetT<T>::backward(const ForwardTape<T>& tape, const Tensor<T>& grad_logits) {
  run_backward(tape, grad_logits, true);
}

template <typename T>
Tensor<T> ForceNetT<T>::backward_input(const ForwardTape<T>& tape, const Tensor<T>& grad_logits) {
  return run_backward(tape, grad_logits, false);
}

template <typename T>
void ForceNetT<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void ForceNetT<T>::reset_optimizer() {
  for (auto& p : params_) p.reset_optimizer();
}

template <typename T>
std::size_t ForceNetT<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

template <typename T>
std::size_t ForceNetT<T>::mac_count() const {
  std::size_t h = config_.seq_len, w = config_.bins, cin = config_.in_channels, macs = 0;
  for (auto cout : config_.encoder_widths) {
    macs += 9 * cin * cout * h * w;
    cin = cout;
    h /= 2;
    w /= 2;
  }
  for (auto cout : config_.decoder_widths) {
    macs += 9 * cin * cout * h * w;
    cin = cout;
    h *= 2;
  }
  // head runs after the frequency axis is pooled to width 1
  return macs + cin * config_.outputs * h;
}

template <typename T>
void ForceNetT<T>::set_input_stats(std::span<const double> mean, std::span<const double> stddev) {
  if (mean.size() != config_.in_channels || stddev.size() != config_.in_channels) {
    throw ShapeError("forcenet: input stats must have one entry per channel");
  }
  for (std::size_t c = 0; c < config_.in_channels; ++c) {
    if (!(stddev[c] > 0.0)) throw InvalidArgument("forcenet: input std must be positive");
    params_[input_mean_].value[c] = static_cast<T>(mean[c]);
    params_[input_std_].value[c] = static_cast<T>(stddev[c]);
  }
}

template <typename T>
void ForceNetT<T>::normalize_inplace(std::span<float> block) const {
  const std::size_t per = config_.seq_len * config_.bins;
  if (block.size() != config_.in_channels * per) throw ShapeError("forcenet: normalize block size mismatch");
  for (std::size_t c = 0; c < config_.in_channels; ++c) {
    const float mean = static_cast<float>(params_[input_mean_].value[c]);
    const float inv = 1.0f / static_cast<float>(params_[input_std_].value[c]);
    for (std::size_t i = 0; i < per; ++i) block[c * per + i] = (block[c * per + i] - mean) * inv;
  }
}

template <typename T>
Checkpoint ForceNetT<T>::to_checkpoint() const requires std::is_same_v<T, float> {
  Checkpoint ckpt;
  ckpt.config_json = config_.to_json();
  for (const auto& p : params_) {
    CheckpointEntry e;
    e.name = p.name;
    for (auto d : p.value.shape()) e.dims.push_back(static_cast<std::uint32_t>(d));
    e.data = p.value.vec();
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

template <typename T>
ForceNetT<T> ForceNetT<T>::from_checkpoint(const Checkpoint& ckpt) requires std::is_same_v<T, float> {
  ForceNetT<T> model(ForceNetConfig::from_json(ckpt.config_json));
  for (auto& p : model.params_) {
    const auto* e = ckpt.find(p.name);
    if (e == nullptr) throw FormatError("checkpoint: missing parameter " + p.name);
    Shape dims(e->dims.begin(), e->dims.end());
    if (dims != p.value.shape()) {
      throw FormatError("checkpoint: parameter " + p.name + " has shape " + nn::shape_str(dims) +
                        ", model expects " + nn::shape_str(p.value.shape()));
    }
    p.value.vec() = e->data;
  }
  return model;
}

template <typename T>
void ForceNetT<T>::save(const std::filesystem::path& path) const requires std::is_same_v<T, float> {
  write_checkpoint(path, to_checkpoint());
}

template <typename T>
ForceNetT<T> ForceNetT<T>::load(const std::filesystem::path& path) requires std::is_same_v<T, float> {
  return from_checkpoint(read_checkpoint(path));
}

template class ForceNetT<float>;
template class ForceNetT<double>;

double prob_to_force(double p, double f_max) { return 2.0 * f_max * std::max(0.0, p - 0.5); }

std::vector<std::vector<float>> probs_to_force(const std::vector<std::vector<float>>& probs, double f_max) {
  std::vector<std::vector<float>> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i].resize(probs[i].size());
    for (std::size_t t = 0; t < probs[i].size(); ++t) {
      out[i][t] = static_cast<float>(prob_to_force(probs[i][t], f_max));
    }
  }
  return out;
}

double linear_to_force(double z, double f_max, double cutoff_n) {
  const double f = std::clamp(z * f_max, 0.0, f_max);
  return f < cutoff_n ? 0.0 : f;
}

template <typename T>
LossBreakdown joint_loss(std::span<const T> p, std::span<const std::uint8_t> y, std::span<const T> force,
                         double f_max, double lambda, std::span<T> grad_p, std::span<T> grad_logits) {
  const std::size_t n = p.size();
  if (y.size() != n || force.size() != n) throw ShapeError("joint_loss: p, y and F must have equal sizes");
  if (!grad_p.empty() && grad_p.size() != n) throw ShapeError("joint_loss: grad_p size mismatch");
  if (!grad_logits.empty() && grad_logits.size() != n) throw ShapeError("joint_loss: grad_logits size mismatch");
  if (n == 0) return {};
  const double inv_n = 1.0 / static_cast<double>(n);
  double lc = 0.0, lr = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pk = static_cast<double>(p[k]);
    const double pc = std::clamp(pk, kProbClamp, 1.0 - kProbClamp);
    const double yk = y[k];
    lc -= yk * std::log(pc) + (1.0 - yk) * std::log(1.0 - pc);
    const double gate = pk > 0.5 ? 1.0 : 0.0;
    const double fhat_norm = 2.0 * std::max(0.0, pk - 0.5);
    const double diff = fhat_norm - static_cast<double>(force[k]) / f_max;
    lr += diff * diff;
    // d Lr / dp: zero on the closed half p <= 0.5 where the max gate is shut.
    const double dlr_dp = gate * 2.0 * diff * 2.0 * inv_n;
    if (!grad_p.empty()) {
      const double dlc_dp = (pc == pk) ? -(yk / pc - (1.0 - yk) / (1.0 - pc)) * inv_n : 0.0;
      grad_p[k] = static_cast<T>(dlc_dp + lambda * dlr_dp);
    }
    if (!grad_logits.empty()) {
      grad_logits[k] = static_cast<T>((pk - yk) * inv_n + lambda * dlr_dp * pk * (1.0 - pk));
    }
  }
  LossBreakdown out;
  out.classification = lc * inv_n;
  out.regression = lr * inv_n;
  out.total = out.classification + lambda * out.regression;
  return out;
}

template <typename T>
double regression_only_loss(std::span<const T> pred_norm, std::span<const T> force, double f_max,
                            RegressionKind kind, std::span<T> grad) {
  const std::size_t n = pred_norm.size();
  if (force.size() != n) throw ShapeError("regression_only_loss: size mismatch");
  if (!grad.empty() && grad.size() != n) throw ShapeError("regression_only_loss: grad size mismatch");
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = static_cast<double>(pred_norm[k]) - static_cast<double>(force[k]) / f_max;
    if (kind == RegressionKind::l2) {
      loss += d * d;
      if (!grad.empty()) grad[k] = static_cast<T>(2.0 * d * inv_n);
    } else {
      loss += std::abs(d);
      if (!grad.empty()) grad[k] = static_cast<T>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n);
    }
  }
  return loss * inv_n;
}

template LossBreakdown joint_loss<float>(std::span<const float>, std::span<const std::uint8_t>,
                                         std::span<const float>, double, double, std::span<float>,
                                         std::span<float>);
template LossBreakdown joint_loss<double>(std::span<const double>, std::span<const std::uint8_t>,
                                          std::span<const double>, double, double, std::span<double>,
                                          std::span<double>);
template double regression_only_loss<float>(std::span<const float>, std::span<const float>, double,
                                            RegressionKind, std::span<float>);
template double regression_only_loss<double>(std::span<const double>, std::span<const double>, double,
                                             RegressionKind, std::span<double>);

}  // namespace emgforge
