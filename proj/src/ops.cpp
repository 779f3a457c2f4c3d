// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace emgforge::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

std::string dim_mismatch(const char* op, const char* dim, std::size_t got, std::size_t want) {
  return std::string(op) + ": dimension " + dim + " is " + std::to_string(got) + ", expected " +
         std::to_string(want);
}

// Writes the 3x3 patches of one (C, H, W) image into `cols`, a (C*9) x P block
// whose rows are `ld` apart. Row index = c*9 + kh*3 + kw, column = h*W + w.
template <typename T>
void im2col3x3(const T* x, std::size_t channels, std::size_t height, std::size_t width, T* cols,
               std::size_t ld) {
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = x + c * height * width;
    for (std::ptrdiff_t kh = 0; kh < 3; ++kh) {
      for (std::ptrdiff_t kw = 0; kw < 3; ++kw) {
        T* row = cols + (c * 9 + static_cast<std::size_t>(kh * 3 + kw)) * ld;
        for (std::ptrdiff_t h = 0; h < H; ++h) {
          const std::ptrdiff_t hs = h + kh - 1;
          T* dst = row + h * W;
          if (hs < 0 || hs >= H) {
            std::fill(dst, dst + W, T(0));
            continue;
          }
          const T* src = plane + hs * W;
          for (std::ptrdiff_t w = 0; w < W; ++w) {
            const std::ptrdiff_t ws = w + kw - 1;
            dst[w] = (ws < 0 || ws >= W) ? T(0) : src[ws];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3x3(const T* cols, std::size_t ld, std::size_t channels, std::size_t height,
               std::size_t width, T* x) {
  const auto H = static_cast<std::ptrdiff_t>(height);
  const auto W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = x + c * height * width;
    for (std::ptrdiff_t kh = 0; kh < 3; ++kh) {
      for (std::ptrdiff_t kw = 0; kw < 3; ++kw) {
        const T* row = cols + (c * 9 + static_cast<std::size_t>(kh * 3 + kw)) * ld;
        for (std::ptrdiff_t h = 0; h < H; ++h) {
          const std::ptrdiff_t hs = h + kh - 1;
          if (hs < 0 || hs >= H) continue;
          const T* src = row + h * W;
          T* dst = plane + hs * W;
          for (std::ptrdiff_t w = 0; w < W; ++w) {
            const std::ptrdiff_t ws = w + kw - 1;
            if (ws >= 0 && ws < W) dst[ws] += src[w];
          }
        }
      }
    }
  }
}

// Sequential sum. Eigen's vectorised redux peels by pointer alignment, which makes the
// rounding depend on where the allocator put the buffer.
template <typename T>
T ordered_sum(const T* x, std::size_t n) {
  T s = T(0);
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError(dim_mismatch("conv2d", "weight Cin", weight.dim(1), input.dim(1)));
  }
  if (weight.dim(2) != 3) throw ShapeError(dim_mismatch("conv2d", "kernel height", weight.dim(2), 3));
  if (weight.dim(3) != 3) throw ShapeError(dim_mismatch("conv2d", "kernel width", weight.dim(3), 3));
  if (bias != nullptr && (bias->rank() != 1 || bias->dim(0) != weight.dim(0))) {
    throw ShapeError(dim_mismatch("conv2d", "bias Cout", bias->size(), weight.dim(0)));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  check_conv_shapes(input, weight, &bias);
  const std::size_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Cout = weight.dim(0), K = Cin * 9, P = H * W;
  Tensor<T> out({N, Cout, H, W});
  std::vector<T> cols(K * P);
  CMapMat<T> wmat(weight.data(), static_cast<Eigen::Index>(Cout), static_cast<Eigen::Index>(K));
  CMapMat<T> cmat(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
  // One GEMM per sample keeps each sample's result independent of batch size.
  for (std::size_t n = 0; n < N; ++n) {
    im2col3x3(input.data() + n * Cin * P, Cin, H, W, cols.data(), P);
    MapMat<T> y(out.data() + n * Cout * P, static_cast<Eigen::Index>(Cout), static_cast<Eigen::Index>(P));
    y.noalias() = wmat * cmat;
    for (std::size_t co = 0; co < Cout; ++co) y.row(static_cast<Eigen::Index>(co)).array() += bias[co];
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight,
                               const Tensor<T>& grad_out) {
  check_conv_shapes<T>(input, weight, nullptr);
  const std::size_t N = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Cout = weight.dim(0), K = Cin * 9, P = H * W, NP = N * P;
  if (grad_out.shape() != Shape{N, Cout, H, W}) {
    throw ShapeError("conv2d_backward: grad shape " + shape_str(grad_out.shape()) + " != " +
                     shape_str({N, Cout, H, W}));
  }
  // Whole-batch matrices: cols is K x (N*P), dy is Cout x (N*P).
  std::vector<T> cols(K * NP);
  std::vector<T> dy(Cout * NP);
  for (std::size_t n = 0; n < N; ++n) {
    im2col3x3(input.data() + n * Cin * P, Cin, H, W, cols.data() + n * P, NP);
    for (std::size_t co = 0; co < Cout; ++co) {
      std::copy_n(grad_out.data() + (n * Cout + co) * P, P, dy.data() + co * NP + n * P);
    }
  }
  const auto eK = static_cast<Eigen::Index>(K), eNP = static_cast<Eigen::Index>(NP),
             eC = static_cast<Eigen::Index>(Cout);
  CMapMat<T> cmat(cols.data(), eK, eNP);
  CMapMat<T> dymat(dy.data(), eC, eNP);
  CMapMat<T> wmat(weight.data(), eC, eK);

  Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), Tensor<T>({Cout})};
  MapMat<T> dw(g.weight.data(), eC, eK);
  dw.noalias() = dymat * cmat.transpose();
  for (std::size_t co = 0; co < Cout; ++co) {
    g.bias[co] = ordered_sum(dy.data() + co * NP, NP);
  }
  RowMat<T> dcols = wmat.transpose() * dymat;
  for (std::size_t n = 0; n < N; ++n) {
    col2im3x3(dcols.data() + n * P, NP, Cin, H, W, g.input.data() + n * Cin * P);
  }
  return g;
}

template <typename T>
Tensor<T> batchnorm2d_train(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var,
                            BatchNormCache<T>* cache) {
  require_rank(input, 4, "batchnorm2d input");
  const std::size_t N = input.dim(0), C = input.dim(1), P = input.dim(2) * input.dim(3);
  if (gamma.size() != C || beta.size() != C || running_mean.size() != C || running_var.size() != C) {
    throw ShapeError(dim_mismatch("batchnorm2d", "channel parameters", gamma.size(), C));
  }
  const std::size_t M = N * P;
  if (M < 2) throw DegenerateBatch("batchnorm2d: degenerate batch, N*H*W must be >= 2 in train mode");

  Tensor<T> out(input.shape());
  Tensor<T> xhat(input.shape());
  std::vector<T> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* x = input.data() + (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) sum += x[p];
    }
    const double mean = sum / static_cast<double>(M);
    double sq = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* x = input.data() + (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) {
        const double d = x[p] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(M);
    const double istd = 1.0 / std::sqrt(var + kBatchNormEps);
    inv_std[c] = static_cast<T>(istd);
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) {
        const T xh = static_cast<T>((input[off + p] - mean) * istd);
        xhat[off + p] = xh;
        out[off + p] = gamma[c] * xh + beta[c];
      }
    }
    const double m = kBatchNormMomentum;
    running_mean[c] = static_cast<T>((1.0 - m) * running_mean[c] + m * mean);
    running_var[c] = static_cast<T>((1.0 - m) * running_var[c] +
                                    m * sq / static_cast<double>(M - 1));
  }
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm2d_eval(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                           const Tensor<T>& running_mean, const Tensor<T>& running_var) {
  require_rank(input, 4, "batchnorm2d input");
  const std::size_t N = input.dim(0), C = input.dim(1), P = input.dim(2) * input.dim(3);
  if (gamma.size() != C || beta.size() != C || running_mean.size() != C || running_var.size() != C) {
    throw ShapeError(dim_mismatch("batchnorm2d", "channel parameters", gamma.size(), C));
  }
  Tensor<T> out(input.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const T scale = static_cast<T>(gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps));
    const T shift = beta[c] - running_mean[c] * scale;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) out[off + p] = input[off + p] * scale + shift;
    }
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma,
                                       const Tensor<T>& grad_out) {
  const Tensor<T>& xhat = cache.xhat;
  if (grad_out.shape() != xhat.shape()) {
    throw ShapeError("batchnorm2d_backward: grad shape " + shape_str(grad_out.shape()) + " != " +
                     shape_str(xhat.shape()));
  }
  const std::size_t N = xhat.dim(0), C = xhat.dim(1), P = xhat.dim(2) * xhat.dim(3);
  const double M = static_cast<double>(N * P);
  BatchNormGrads<T> g{Tensor<T>(xhat.shape()), Tensor<T>({C}), Tensor<T>({C})};
  for (std::size_t c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) {
        sum_dy += grad_out[off + p];
        sum_dy_xhat += static_cast<double>(grad_out[off + p]) * xhat[off + p];
      }
    }
    g.gamma[c] = static_cast<T>(sum_dy_xhat);
    g.beta[c] = static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * cache.inv_std[c] / M;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * P;
      for (std::size_t p = 0; p < P; ++p) {
        g.input[off + p] = static_cast<T>(
            k * (M * grad_out[off + p] - sum_dy - xhat[off + p] * sum_dy_xhat));
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  if (output.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = output[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& input, std::vector<std::uint32_t>* argmax) {
  require_rank(input, 4, "maxpool2x2 input");
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 != 0) throw ShapeError("maxpool2x2: height " + std::to_string(H) + " is odd");
  if (W % 2 != 0) throw ShapeError("maxpool2x2: width " + std::to_string(W) + " is odd");
  const std::size_t Ho = H / 2, Wo = W / 2;
  Tensor<T> out({N, C, Ho, Wo});
  if (argmax != nullptr) argmax->resize(out.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const std::size_t base = nc * H * W;
    for (std::size_t h = 0; h < Ho; ++h) {
      for (std::size_t w = 0; w < Wo; ++w, ++o) {
        const std::size_t cand[4] = {base + (2 * h) * W + 2 * w, base + (2 * h) * W + 2 * w + 1,
                                     base + (2 * h + 1) * W + 2 * w, base + (2 * h + 1) * W + 2 * w + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k) {
          if (input[cand[k]] > input[best]) best = cand[k];
        }
        out[o] = input[best];
        if (argmax != nullptr) (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                              const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2x2_backward: argmax size mismatch");
  Tensor<T> g(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) g[argmax[o]] += grad_out[o];
  return g;
}

namespace {

struct Lerp {
  std::size_t i0, i1;
  double w1;
};

// Source taps for output row `o` when doubling length `t` (align_corners = false).
Lerp upsample_taps(std::size_t o, std::size_t t) {
  double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
  if (src < 0.0) src = 0.0;
  const auto i0 = std::min(static_cast<std::size_t>(src), t - 1);
  const std::size_t i1 = std::min(i0 + 1, t - 1);
  return {i0, i1, src - static_cast<double>(i0)};
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear_time(const Tensor<T>& input) {
  require_rank(input, 4, "upsample_bilinear_time input");
  const std::size_t N = input.dim(0), C = input.dim(1), Tn = input.dim(2), S = input.dim(3);
  if (Tn < 1) throw ShapeError("upsample_bilinear_time: time dimension is 0");
  Tensor<T> out({N, C, 2 * Tn, S});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* x = input.data() + nc * Tn * S;
    T* y = out.data() + nc * 2 * Tn * S;
    for (std::size_t o = 0; o < 2 * Tn; ++o) {
      const Lerp l = upsample_taps(o, Tn);
      const T w1 = static_cast<T>(l.w1), w0 = static_cast<T>(1.0 - l.w1);
      for (std::size_t s = 0; s < S; ++s) y[o * S + s] = w0 * x[l.i0 * S + s] + w1 * x[l.i1 * S + s];
    }
  }
  return out;
}

template <typename T>
Tensor<T> upsample_bilinear_time_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  const std::size_t N = input_shape[0], C = input_shape[1], Tn = input_shape[2], S = input_shape[3];
  if (grad_out.shape() != Shape{N, C, 2 * Tn, S}) {
    throw ShapeError("upsample_bilinear_time_backward: grad shape " + shape_str(grad_out.shape()));
  }
  Tensor<T> g(input_shape);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* dy = grad_out.data() + nc * 2 * Tn * S;
    T* dx = g.data() + nc * Tn * S;
    for (std::size_t o = 0; o < 2 * Tn; ++o) {
      const Lerp l = upsample_taps(o, Tn);
      const T w1 = static_cast<T>(l.w1), w0 = static_cast<T>(1.0 - l.w1);
      for (std::size_t s = 0; s < S; ++s) {
        dx[l.i0 * S + s] += w0 * dy[o * S + s];
        dx[l.i1 * S + s] += w1 * dy[o * S + s];
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> mean_freq(const Tensor<T>& input) {
  require_rank(input, 4, "mean_freq input");
  const std::size_t rows = input.dim(0) * input.dim(1) * input.dim(2), S = input.dim(3);
  Tensor<T> out({input.dim(0), input.dim(1), input.dim(2), 1});
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    for (std::size_t s = 0; s < S; ++s) acc += input[r * S + s];
    out[r] = acc / static_cast<T>(S);
  }
  return out;
}

template <typename T>
Tensor<T> mean_freq_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  const std::size_t S = input_shape[3];
  Tensor<T> g(input_shape);
  if (grad_out.size() * S != g.size()) throw ShapeError("mean_freq_backward: shape mismatch");
  for (std::size_t r = 0; r < grad_out.size(); ++r) {
    const T v = grad_out[r] / static_cast<T>(S);
    for (std::size_t s = 0; s < S; ++s) g[r * S + s] = v;
  }
  return g;
}

template <typename T>
Tensor<T> linear_channels(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input, 4, "linear_channels input");
  require_rank(weight, 2, "linear_channels weight");
  const std::size_t N = input.dim(0), C = input.dim(1), P = input.dim(2) * input.dim(3);
  const std::size_t F = weight.dim(0);
  if (weight.dim(1) != C) throw ShapeError(dim_mismatch("linear_channels", "weight C", weight.dim(1), C));
  if (bias.size() != F) throw ShapeError(dim_mismatch("linear_channels", "bias F", bias.size(), F));
  Tensor<T> out({N, F, input.dim(2), input.dim(3)});
  CMapMat<T> wmat(weight.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(C));
  for (std::size_t n = 0; n < N; ++n) {
    CMapMat<T> x(input.data() + n * C * P, static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(P));
    MapMat<T> y(out.data() + n * F * P, static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(P));
    y.noalias() = wmat * x;
    for (std::size_t f = 0; f < F; ++f) y.row(static_cast<Eigen::Index>(f)).array() += bias[f];
  }
  return out;
}

template <typename T>
LinearGrads<T> linear_channels_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                        const Tensor<T>& grad_out) {
  const std::size_t N = input.dim(0), C = input.dim(1), P = input.dim(2) * input.dim(3);
  const std::size_t F = weight.dim(0);
  if (grad_out.shape() != Shape{N, F, input.dim(2), input.dim(3)}) {
    throw ShapeError("linear_channels_backward: grad shape " + shape_str(grad_out.shape()));
  }
  LinearGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), Tensor<T>({F})};
  const auto eC = static_cast<Eigen::Index>(C), eF = static_cast<Eigen::Index>(F),
             eP = static_cast<Eigen::Index>(P);
  CMapMat<T> wmat(weight.data(), eF, eC);
  MapMat<T> dw(g.weight.data(), eF, eC);
  for (std::size_t n = 0; n < N; ++n) {
    CMapMat<T> x(input.data() + n * C * P, eC, eP);
    CMapMat<T> dy(grad_out.data() + n * F * P, eF, eP);
    MapMat<T> dx(g.input.data() + n * C * P, eC, eP);
    dw.noalias() += dy * x.transpose();
    dx.noalias() = wmat.transpose() * dy;
    for (std::size_t f = 0; f < F; ++f) g.bias[f] += ordered_sum(grad_out.data() + (n * F + f) * P, P);
  }
  return g;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T x = input[i];
    if (x >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out[i] = e / (T(1) + e);
    }
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = grad_out[i] * output[i] * (T(1) - output[i]);
  return g;
}

#define EMGFORGE_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> batchnorm2d_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                       Tensor<T>&, Tensor<T>&, BatchNormCache<T>*);                 \
  template Tensor<T> batchnorm2d_eval(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                      const Tensor<T>&, const Tensor<T>&);                          \
  template BatchNormGrads<T> batchnorm2d_backward(const BatchNormCache<T>&, const Tensor<T>&,       \
                                                  const Tensor<T>&);                                \
  template Tensor<T> relu(const Tensor<T>&);                                                        \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> maxpool2x2(const Tensor<T>&, std::vector<std::uint32_t>*);                     \
  template Tensor<T> maxpool2x2_backward(const Shape&, const std::vector<std::uint32_t>&,           \
                                         const Tensor<T>&);                                         \
  template Tensor<T> upsample_bilinear_time(const Tensor<T>&);                                      \
  template Tensor<T> upsample_bilinear_time_backward(const Shape&, const Tensor<T>&);               \
  template Tensor<T> mean_freq(const Tensor<T>&);                                                   \
  template Tensor<T> mean_freq_backward(const Shape&, const Tensor<T>&);                            \
  template Tensor<T> linear_channels(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template LinearGrads<T> linear_channels_backward(const Tensor<T>&, const Tensor<T>&,              \
                                                   const Tensor<T>&);                               \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                     \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);

EMGFORGE_INSTANTIATE_OPS(float)
EMGFORGE_INSTANTIATE_OPS(double)

#undef EMGFORGE_INSTANTIATE_OPS

}  // namespace emgforge::nn
