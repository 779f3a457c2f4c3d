// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Encoder-decoder force network over EMG log-spectrogram windows, the force
// head and the training losses.
//
//   input (N, C, L, S)
//   encoder: depth x [conv3x3 -> batchnorm -> relu -> maxpool2x2]
//   decoder: depth x [conv3x3 -> batchnorm -> relu -> upsample x2 in time]
//   mean over the remaining frequency columns -> (N, Cdec, L, 1)
//   linear over channels -> (N, F, L) logits -> sigmoid (or identity) head

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "emgforge/checkpoint.hpp"
#include "emgforge/ops.hpp"
#include "emgforge/param.hpp"
#include "emgforge/signal.hpp"

namespace emgforge {

inline constexpr double kLabelThresholdN = 0.25;
inline constexpr double kDefaultCutoffN = 0.5;
inline constexpr double kProbClamp = 1e-7;

enum class HeadKind { sigmoid, linear };
enum class Task { force, tap };

/// Regression weight of the joint loss. With lambda = 1 the per-frame optimum of
/// -ln p + lambda (2p - 1 - F/F_max)^2 overshoots active frames by about
/// F_max / (4 lambda p), roughly 10 N; at 10 the overshoot is about 1 N.
inline constexpr double kDefaultLambda = 10.0;

struct ForceNetConfig {
  std::size_t in_channels = kEmgChannels;
  std::size_t seq_len = 32;
  std::size_t bins = 64;
  std::vector<std::size_t> encoder_widths{32, 64, 128, 256};
  std::vector<std::size_t> decoder_widths{128, 64, 32, 16};
  std::size_t outputs = kFingers;
  double f_max = 30.0;
  double lambda = kDefaultLambda;
  HeadKind head = HeadKind::sigmoid;
  Task task = Task::force;
  bool calibrated = false;

  /// Throws ConfigError when depths differ or L/S are not divisible by 2^depth.
  void validate() const;
  std::string to_json() const;
  static ForceNetConfig from_json(const std::string& text);
};

enum class Mode { train, eval };

/// Activations kept by a training forward pass for the backward pass.
template <typename T>
struct ForwardTape {
  struct Block {
    nn::Tensor<T> conv_in;
    nn::BatchNormCache<T> bn;
    nn::Tensor<T> relu_out;
    std::vector<std::uint32_t> pool_argmax;
  };
  std::vector<Block> encoder;
  std::vector<Block> decoder;
  nn::Shape pooled_input_shape;
  nn::Tensor<T> head_in;
};

template <typename T>
class ForceNetT {
 public:
  explicit ForceNetT(ForceNetConfig config, std::uint64_t seed = 0);

  const ForceNetConfig& config() const { return config_; }
  ForceNetConfig& mutable_config() { return config_; }
  std::vector<nn::Parameter<T>>& params() { return params_; }
  const std::vector<nn::Parameter<T>>& params() const { return params_; }
  nn::Parameter<T>& param(const std::string& name);
  const nn::Parameter<T>& param(const std::string& name) const;

  /// Head pre-activations, shape (N, F, L). In train mode batch statistics are
  /// used and running statistics updated; pass `tape` to enable backward().
  nn::Tensor<T> forward_logits(const nn::Tensor<T>& input, Mode mode, ForwardTape<T>* tape = nullptr);
  /// Head output: probabilities for a sigmoid head, normalised force for a linear head.
  nn::Tensor<T> forward(const nn::Tensor<T>& input, Mode mode = Mode::eval);
  /// Accumulates parameter gradients from d(loss)/d(logits).
  void backward(const ForwardTape<T>& tape, const nn::Tensor<T>& grad_logits);
  /// d(loss)/d(input) for the last recorded pass (used by gradient checks).
  nn::Tensor<T> backward_input(const ForwardTape<T>& tape, const nn::Tensor<T>& grad_logits);

  void zero_grad();
  void reset_optimizer();

  /// Trainable parameter count (buffers excluded).
  std::size_t param_count() const;
  /// Multiply-accumulates for one window: 9*Cin*Cout*H*W per conv plus C*F*T*S for the head.
  std::size_t mac_count() const;

  /// Per-channel z-score statistics of log-spectrograms, stored as buffers.
  void set_input_stats(std::span<const double> mean, std::span<const double> std);
  /// Z-scores a (C, L, S) log-spectrogram block in place.
  void normalize_inplace(std::span<float> block) const;

  Checkpoint to_checkpoint() const requires std::is_same_v<T, float>;
  static ForceNetT from_checkpoint(const Checkpoint& ckpt) requires std::is_same_v<T, float>;
  void save(const std::filesystem::path& path) const requires std::is_same_v<T, float>;
  static ForceNetT load(const std::filesystem::path& path) requires std::is_same_v<T, float>;

 private:
  struct ConvBlockIdx {
    std::size_t weight, bias, gamma, beta, running_mean, running_var;
  };

  std::size_t add_param(std::string name, nn::Tensor<T> value, bool trainable);
  ConvBlockIdx add_block(const std::string& prefix, std::size_t cin, std::size_t cout,
                         std::mt19937_64& rng);
  nn::Tensor<T> run_backward(const ForwardTape<T>& tape, const nn::Tensor<T>& grad_logits,
                             bool accumulate_params);

  ForceNetConfig config_;
  std::vector<nn::Parameter<T>> params_;
  std::vector<ConvBlockIdx> encoder_;
  std::vector<ConvBlockIdx> decoder_;
  std::size_t head_weight_ = 0, head_bias_ = 0, input_mean_ = 0, input_std_ = 0;
};

using ForceNet = ForceNetT<float>;

/// F = 2 F_max max(0, p - 0.5), elementwise.
double prob_to_force(double p, double f_max);
std::vector<std::vector<float>> probs_to_force(const std::vector<std::vector<float>>& probs, double f_max);

/// Linear-head output (force / F_max) to newtons: clamped to [0, F_max], then
/// predictions below `cutoff_n` zeroed.
double linear_to_force(double z, double f_max, double cutoff_n);

inline std::uint8_t force_label(double newtons) { return newtons > kLabelThresholdN ? 1 : 0; }

struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double regression = 0.0;
};

/// Joint classification-regression loss over matching (.., F, L) arrays:
///   Lc = -mean[y log p + (1-y) log(1-p)]          (p clamped to [1e-7, 1-1e-7])
///   Lr = mean[(F_hat/F_max - F/F_max)^2],  F_hat = 2 F_max max(0, p - 0.5)
///   total = Lc + lambda Lr
/// `grad_p` receives d(total)/dp. `grad_logits` receives d(total)/dz for
/// p = sigmoid(z), with the cross-entropy part in its exact (p - y)/n form.
template <typename T>
LossBreakdown joint_loss(std::span<const T> p, std::span<const std::uint8_t> y, std::span<const T> force,
                         double f_max, double lambda, std::span<T> grad_p = {},
                         std::span<T> grad_logits = {});

enum class RegressionKind { l1, l2 };

/// Mean absolute / squared error between linear-head outputs (normalised
/// force) and force / F_max.
template <typename T>
double regression_only_loss(std::span<const T> pred_norm, std::span<const T> force, double f_max,
                            RegressionKind kind, std::span<T> grad = {});

}  // namespace emgforge
