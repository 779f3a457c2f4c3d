// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// DSP front-end: windowing, STFT magnitude spectrograms, bin cropping,
// log compression, smoothing filters and force/frame time alignment.
// All functions are pure and thread-safe.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emgforge {

inline constexpr std::size_t kEmgChannels = 8;
inline constexpr std::size_t kFingers = 5;
inline constexpr double kEmgRateHz = 2000.0;

/// Multichannel raw EMG, stored channel-major: samples[channel][time].
struct EmgBuffer {
  double rate_hz = kEmgRateHz;
  std::vector<std::vector<float>> samples;

  std::size_t channels() const { return samples.size(); }
  std::size_t length() const { return samples.empty() ? 0 : samples.front().size(); }
  /// Throws InvalidArgument on ragged channels, no channels or rate <= 0.
  void validate() const;
};

struct WindowSpec {
  std::size_t window_len = 256;
  std::size_t hop = 32;
  std::size_t bins_kept = 64;

  std::size_t full_bins() const { return window_len / 2 + 1; }
  void validate() const;
};

/// Per-channel time-frequency magnitudes, laid out [channel][frame][bin].
struct Spectrogram {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> mag;
  std::vector<double> frame_times_s;

  float& at(std::size_t c, std::size_t f, std::size_t b) {
    return mag[(c * frames + f) * bins + b];
  }
  float at(std::size_t c, std::size_t f, std::size_t b) const {
    return mag[(c * frames + f) * bins + b];
  }
};

/// Per-finger force in newtons, values[finger][sample] with one timestamp
/// per sample (native pad timestamps or spectrogram frame centres).
struct ForceSeries {
  std::vector<std::vector<float>> values;
  std::vector<double> times_s;

  std::size_t fingers() const { return values.size(); }
  std::size_t length() const { return times_s.size(); }
};

/// Number of STFT frames produced from `num_samples` samples.
std::size_t frame_count(std::size_t num_samples, const WindowSpec& spec);

/// Periodic Hann window, w[k] = 0.5 (1 - cos(2 pi k / n)).
std::vector<double> hann_window(std::size_t n);

/// Magnitude STFT of every channel. Frame k covers samples
/// [k*hop, k*hop + window_len) and is stamped with its centre time;
/// `first_sample_index` offsets the timestamps for buffers cut from a longer
/// stream. All window_len/2 + 1 bins are returned (see crop_bins).
Spectrogram stft_magnitude(const EmgBuffer& emg, const WindowSpec& spec,
                           std::size_t first_sample_index = 0);

/// Keeps bins [0, bins_kept).
Spectrogram crop_bins(const Spectrogram& sg, std::size_t bins_kept);

/// Entry-wise ln(mag + eps).
Spectrogram log_compress(const Spectrogram& sg, double eps = 1e-6);

enum class SmoothKind { gaussian, mean };

/// Normalised smoothing kernel over integer offsets [-window/2, window-1-window/2].
std::vector<double> smoothing_kernel(SmoothKind kind, std::size_t window);

/// Centred FIR smoothing with edge replication; output length equals input.
std::vector<float> smooth(std::span<const float> series, SmoothKind kind, std::size_t window);
std::vector<std::vector<float>> smooth(const std::vector<std::vector<float>>& series,
                                       SmoothKind kind, std::size_t window);

/// One-sided Gaussian weights over lags 0..window-1 (lag 0 = newest), not normalised.
std::vector<double> causal_gaussian_weights(std::size_t window);

/// Causal counterpart of smooth(gaussian): each output mixes the current and up to
/// window-1 previous inputs, renormalised to the history that exists.
std::vector<float> smooth_causal(std::span<const float> series, std::size_t window);
std::vector<std::vector<float>> smooth_causal(const std::vector<std::vector<float>>& series,
                                              std::size_t window);

/// Nearest-neighbour resampling onto `target_times_s`. Ties go to the earlier
/// sample; targets outside the native range clamp to the end samples.
ForceSeries resample_nearest(const ForceSeries& force, std::span<const double> target_times_s);

}  // namespace emgforge
