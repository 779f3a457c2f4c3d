// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Forward and backward kernels for the layers used by the force network.
// Every backward takes the upstream gradient and returns gradients for the
// inputs it was given. Layouts are NCHW; kernels are instantiated for float
// and double.
//
// Forward results for one batch element never depend on the other elements
// of the batch (eval-mode batch norm included), so batched and single-window
// inference agree bit for bit.

#pragma once

#include <cstdint>
#include <vector>

#include "emgforge/tensor.hpp"

namespace emgforge::nn {

// conv2d: 3x3, stride 1, zero padding 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                               const Tensor<T>& grad_out);

// batch norm over (N, H, W) per channel.
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

/// Normalises with batch statistics and folds them into the running
/// estimates (unbiased variance, momentum 0.1).
template <typename T>
Tensor<T> batchnorm2d_train(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var,
                            BatchNormCache<T>* cache = nullptr);

template <typename T>
Tensor<T> batchnorm2d_eval(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                           const Tensor<T>& running_mean, const Tensor<T>& running_var);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                       const Tensor<T>& grad_out);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);
/// `output` is the forward result of relu.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

/// Non-overlapping 2x2 max. `argmax` receives, per output element, the flat
/// input index that won (first in row-major order on ties).
template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& input, std::vector<std::uint32_t>* argmax = nullptr);
template <typename T>
Tensor<T> maxpool2x2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                              const Tensor<T>& grad_out);

/// Doubles the time (H) axis by linear interpolation, align_corners = false.
template <typename T>
Tensor<T> upsample_bilinear_time(const Tensor<T>& input);
template <typename T>
Tensor<T> upsample_bilinear_time_backward(const Shape& input_shape, const Tensor<T>& grad_out);

/// Mean over the frequency (W) axis: (N, C, T, S) -> (N, C, T, 1).
template <typename T>
Tensor<T> mean_freq(const Tensor<T>& input);
template <typename T>
Tensor<T> mean_freq_backward(const Shape& input_shape, const Tensor<T>& grad_out);

/// out[n, f, t, s] = sum_c weight[f, c] * in[n, c, t, s] + bias[f].
template <typename T>
Tensor<T> linear_channels(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
LinearGrads<T> linear_channels_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                        const Tensor<T>& grad_out);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);
/// `output` is the forward result of sigmoid.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

}  // namespace emgforge::nn
