// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "emgforge/error.hpp"

namespace emgforge {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Magnitudes of the first n/2+1 DFT bins of a real frame.
class RealDft {
 public:
  explicit RealDft(std::size_t n) : n_(n), buf_(n) {
    if (!is_pow2(n)) {
      twiddle_.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddle_[k] = {std::cos(ang), std::sin(ang)};
      }
    }
  }

  void magnitudes(std::span<const double> frame, std::span<float> out) {
    const std::size_t bins = n_ / 2 + 1;
    if (twiddle_.empty()) {
      for (std::size_t i = 0; i < n_; ++i) buf_[i] = {frame[i], 0.0};
      fft_inplace(buf_);
      for (std::size_t b = 0; b < bins; ++b) out[b] = static_cast<float>(std::abs(buf_[b]));
      return;
    }
    for (std::size_t b = 0; b < bins; ++b) {
      std::complex<double> acc(0.0, 0.0);
      for (std::size_t i = 0; i < n_; ++i) acc += frame[i] * twiddle_[(b * i) % n_];
      out[b] = static_cast<float>(std::abs(acc));
    }
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> buf_;
  std::vector<std::complex<double>> twiddle_;
};

std::size_t offset_lo(std::size_t window) { return window / 2; }

}  // namespace

void EmgBuffer::validate() const {
  if (!(rate_hz > 0.0)) throw InvalidArgument("emg: rate_hz must be positive");
  if (samples.empty()) throw InvalidArgument("emg: at least one channel required");
  const std::size_t n = samples.front().size();
  for (std::size_t c = 1; c < samples.size(); ++c) {
    if (samples[c].size() != n) {
      throw InvalidArgument("emg: channel " + std::to_string(c) + " has " +
                            std::to_string(samples[c].size()) + " samples, expected " +
                            std::to_string(n));
    }
  }
}

void WindowSpec::validate() const {
  if (window_len < 2) throw InvalidArgument("window_len must be >= 2");
  if (hop == 0 || hop > window_len) throw InvalidArgument("hop must be in (0, window_len]");
  if (bins_kept == 0 || bins_kept > full_bins()) {
    throw InvalidArgument("bins_kept must be in [1, window_len/2 + 1]");
  }
}

std::size_t frame_count(std::size_t num_samples, const WindowSpec& spec) {
  if (num_samples < spec.window_len) return 0;
  return (num_samples - spec.window_len) / spec.hop + 1;
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw InvalidArgument("hann_window: n must be >= 2, got " + std::to_string(n));
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                 static_cast<double>(n)));
  }
  return w;
}

Spectrogram stft_magnitude(const EmgBuffer& emg, const WindowSpec& spec,
                           std::size_t first_sample_index) {
  emg.validate();
  spec.validate();
  const std::size_t len = emg.length();
  if (len < spec.window_len) {
    throw InsufficientData("stft_magnitude: " + std::to_string(len) + " samples per channel, need " +
                           std::to_string(spec.window_len));
  }
  const auto window = hann_window(spec.window_len);

  Spectrogram sg;
  sg.channels = emg.channels();
  sg.frames = frame_count(len, spec);
  sg.bins = spec.full_bins();
  sg.mag.assign(sg.channels * sg.frames * sg.bins, 0.0f);
  sg.frame_times_s.resize(sg.frames);
  for (std::size_t f = 0; f < sg.frames; ++f) {
    const double centre = static_cast<double>(first_sample_index + f * spec.hop) +
                          static_cast<double>(spec.window_len) / 2.0;
    sg.frame_times_s[f] = centre / emg.rate_hz;
  }

  RealDft dft(spec.window_len);
  std::vector<double> frame(spec.window_len);
  for (std::size_t c = 0; c < sg.channels; ++c) {
    const auto& x = emg.samples[c];
    for (std::size_t f = 0; f < sg.frames; ++f) {
      const std::size_t start = f * spec.hop;
      for (std::size_t i = 0; i < spec.window_len; ++i) frame[i] = window[i] * x[start + i];
      dft.magnitudes(frame, std::span<float>(&sg.at(c, f, 0), sg.bins));
    }
  }
  return sg;
}

Spectrogram crop_bins(const Spectrogram& sg, std::size_t bins_kept) {
  if (bins_kept == 0 || bins_kept > sg.bins) {
    throw InvalidArgument("crop_bins: bins_kept=" + std::to_string(bins_kept) +
                          " outside [1, " + std::to_string(sg.bins) + "]");
  }
  Spectrogram out;
  out.channels = sg.channels;
  out.frames = sg.frames;
  out.bins = bins_kept;
  out.frame_times_s = sg.frame_times_s;
  out.mag.resize(out.channels * out.frames * out.bins);
  for (std::size_t c = 0; c < sg.channels; ++c) {
    for (std::size_t f = 0; f < sg.frames; ++f) {
      const auto src = sg.mag.begin() + static_cast<std::ptrdiff_t>((c * sg.frames + f) * sg.bins);
      std::copy_n(src, bins_kept, &out.at(c, f, 0));
    }
  }
  return out;
}

Spectrogram log_compress(const Spectrogram& sg, double eps) {
  Spectrogram out = sg;
  for (auto& m : out.mag) m = static_cast<float>(std::log(static_cast<double>(m) + eps));
  return out;
}

std::vector<double> smoothing_kernel(SmoothKind kind, std::size_t window) {
  if (window < 1) throw InvalidArgument("smooth: window must be >= 1");
  std::vector<double> k(window);
  const double lo = static_cast<double>(offset_lo(window));
  const double sigma = static_cast<double>(window) / 4.0;
  for (std::size_t i = 0; i < window; ++i) {
    if (kind == SmoothKind::mean) {
      k[i] = 1.0;
    } else {
      const double o = static_cast<double>(i) - lo;
      k[i] = std::exp(-0.5 * o * o / (sigma * sigma));
    }
  }
  double sum = 0.0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;
  return k;
}

std::vector<float> smooth(std::span<const float> series, SmoothKind kind, std::size_t window) {
  const auto kernel = smoothing_kernel(kind, window);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  std::vector<float> out(series.size());
  if (n == 0) return out;
  const auto lo = static_cast<std::ptrdiff_t>(offset_lo(window));
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(t + static_cast<std::ptrdiff_t>(i) - lo, 0, n - 1);
      acc += kernel[i] * series[static_cast<std::size_t>(src)];
    }
    out[static_cast<std::size_t>(t)] = static_cast<float>(acc);
  }
  return out;
}

std::vector<std::vector<float>> smooth(const std::vector<std::vector<float>>& series,
                                       SmoothKind kind, std::size_t window) {
  std::vector<std::vector<float>> out;
  out.reserve(series.size());
  for (const auto& row : series) out.push_back(smooth(row, kind, window));
  return out;
}

std::vector<double> causal_gaussian_weights(std::size_t window) {
  if (window < 1) throw InvalidArgument("smooth: window must be >= 1");
  const double sigma = static_cast<double>(window) / 4.0;
  std::vector<double> w(window);
  for (std::size_t lag = 0; lag < window; ++lag) {
    const double l = static_cast<double>(lag);
    w[lag] = std::exp(-0.5 * l * l / (sigma * sigma));
  }
  return w;
}

std::vector<float> smooth_causal(std::span<const float> series, std::size_t window) {
  const auto w = causal_gaussian_weights(window);
  std::vector<float> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    double acc = 0.0;
    double norm = 0.0;
    for (std::size_t lag = 0; lag < window && lag <= t; ++lag) {
      acc += w[lag] * series[t - lag];
      norm += w[lag];
    }
    out[t] = static_cast<float>(acc / norm);
  }
  return out;
}

std::vector<std::vector<float>> smooth_causal(const std::vector<std::vector<float>>& series,
                                              std::size_t window) {
  std::vector<std::vector<float>> out;
  out.reserve(series.size());
  for (const auto& row : series) out.push_back(smooth_causal(row, window));
  return out;
}

ForceSeries resample_nearest(const ForceSeries& force, std::span<const double> target_times_s) {
  const std::size_t n = force.times_s.size();
  if (n == 0) throw InsufficientData("resample_nearest: empty force series");
  for (std::size_t i = 0; i < force.values.size(); ++i) {
    if (force.values[i].size() != n) {
      throw ShapeError("resample_nearest: finger " + std::to_string(i) + " length mismatch");
    }
  }
  ForceSeries out;
  out.times_s.assign(target_times_s.begin(), target_times_s.end());
  out.values.assign(force.values.size(), std::vector<float>(target_times_s.size()));
  const auto& ts = force.times_s;
  for (std::size_t k = 0; k < target_times_s.size(); ++k) {
    const double t = target_times_s[k];
    // first native sample with time >= t
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t idx;
    if (it == ts.begin()) {
      idx = 0;
    } else if (it == ts.end()) {
      idx = n - 1;
    } else {
      const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
      const std::size_t lo = hi - 1;
      idx = (t - ts[lo] <= ts[hi] - t) ? lo : hi;
    }
    for (std::size_t i = 0; i < force.values.size(); ++i) out.values[i][k] = force.values[i][idx];
  }
  return out;
}

}  // namespace emgforge
