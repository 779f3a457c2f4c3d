// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Recordings, their on-disk layout, supervised windows and the synthetic
// EMG-force generator.
//
// Recording directory:
//   meta.json   subject, session, action, hand, rates and sample counts
//   emg.bin     little-endian f32, sample-interleaved (s0c0..s0c7, s1c0, ...)
//   force.csv   "t_s,thumb,index,middle,ring,pinky", one row per pad sample
// Dataset root: manifest.json listing recording directories with content hashes.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emgforge/signal.hpp"

namespace emgforge {

inline constexpr double kForceRateHz = 125.0;
inline constexpr double kMaxRecordedForceN = 35.0;
inline constexpr std::array<std::string_view, kFingers> kFingerNames = {"thumb", "index", "middle", "ring",
                                                                        "pinky"};
/// Per-finger maxima observed in human recordings, thumb to pinky.
inline constexpr std::array<double, kFingers> kDefaultForceCaps = {29.8, 24.4, 25.6, 20.4, 14.7};

/// The eleven pressing/pinching finger combinations, plus "freeform".
inline constexpr std::array<std::string_view, 11> kActionSet = {
    "press_thumb", "press_index", "press_middle", "press_ring", "press_pinky", "press_four",
    "pinch_index", "pinch_middle", "pinch_ring",  "pinch_pinky", "pinch_all"};
inline constexpr std::string_view kFreeform = "freeform";

/// Fingers that exert force during `action`; throws ConfigError for unknown labels.
std::vector<std::size_t> action_fingers(std::string_view action);

enum class Hand { left, right };

struct Recording {
  std::string subject;
  std::string session;
  std::string action{kFreeform};
  Hand hand = Hand::right;
  EmgBuffer emg;
  ForceSeries force;  // native pad rate, native timestamps

  std::string id() const { return subject + "_" + session + "_" + action; }
  double duration_s() const { return static_cast<double>(emg.length()) / emg.rate_hz; }
  /// Throws DataError when the rate, range or overlap invariants fail.
  void validate() const;
};

void save_recording(const Recording& rec, const std::filesystem::path& dir);
/// Throws FormatError naming the offending field for malformed files.
Recording load_recording(const std::filesystem::path& dir);

struct ManifestEntry {
  std::string id;
  std::string path;  // relative to the dataset root
  std::string subject;
  std::string session;
  std::string action;
  double duration_s = 0.0;
  std::string hash;  // FNV-1a 64 of meta.json + emg.bin + force.csv
};

/// FNV-1a 64-bit digest of a recording directory's three files, as 16 hex digits.
std::string recording_hash(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root);
/// Loads every recording listed in the manifest.
std::vector<Recording> load_dataset(const std::filesystem::path& root);

struct SyntheticConfig {
  /// Channel-to-finger gains, mixing[channel][finger], non-negative.
  std::array<std::array<double, kFingers>, kEmgChannels> mixing{};
  /// Carrier band centre per (channel, finger), Hz.
  std::array<std::array<double, kFingers>, kEmgChannels> carrier_hz{};
  double carrier_bandwidth_hz = 80.0;
  double band_lo_hz = 20.0;
  double band_hi_hz = 450.0;
  double gamma = 1.5;
  double noise_floor = 1e-3;
  std::array<double, kFingers> caps = kDefaultForceCaps;
  double f_max = 30.0;
  double pulse_rate_hz = 0.1;  // per finger
  double min_pulse_s = 0.3;
  double max_pulse_s = 2.0;
  double min_gap_s = 0.25;
  double min_peak_fraction = 0.15;
  double emg_rate_hz = kEmgRateHz;
  double force_rate_hz = kForceRateHz;
  std::string subject = "S01";
  std::string session = "1";
  std::string action{kFreeform};
  Hand hand = Hand::right;
  std::uint64_t seed = 0;

  /// Throws ConfigError if a finger has no channel with positive gain, a cap
  /// exceeds f_max, or the carrier band leaves [band_lo_hz, band_hi_hz].
  void validate() const;
};

/// Shared anatomy plus a seeded per-subject perturbation of gains and carrier bands.
SyntheticConfig synthetic_subject(std::uint64_t subject_seed, double variability = 1.0);

/// Per-session electrode placement drift (small gain jitter) on top of a subject.
SyntheticConfig synthetic_session(const SyntheticConfig& subject, std::uint64_t session_seed,
                                  double drift = 0.05);

Recording synth_generate(const SyntheticConfig& config, double duration_s);

/// Recording converted to model-ready frames: cropped (log-)magnitude
/// spectrogram with force aligned to frame centres and binary labels.
struct PreparedRecording {
  std::string id;
  std::string subject;
  std::string session;
  std::string action;
  Spectrogram spec;                               // [channel][frame][bin], not z-scored
  std::vector<std::vector<float>> force;          // [finger][frame] newtons
  std::vector<std::vector<std::uint8_t>> labels;  // [finger][frame]

  std::size_t frames() const { return spec.frames; }
};

struct PrepareOptions {
  WindowSpec window;
  bool log_magnitude = true;
  double log_eps = 1e-6;
};

/// STFT -> crop -> optional log; force aligned by nearest-neighbour resampling.
PreparedRecording prepare_recording(const Recording& rec, const PrepareOptions& opts = {});
/// Same front-end for an EMG block without force (streaming).
Spectrogram prepare_emg(const EmgBuffer& emg, const PrepareOptions& opts, std::size_t first_sample_index = 0);

struct InputStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Per-channel mean/std over all frames and bins of the given recordings.
InputStats compute_input_stats(const std::vector<const PreparedRecording*>& recs);

struct SupervisedWindow {
  std::size_t start_frame = 0;
  std::vector<float> input;                       // z-scored [channel][seq_len][bin]
  std::vector<std::vector<float>> force;          // [finger][seq_len]
  std::vector<std::vector<std::uint8_t>> labels;  // [finger][seq_len]
};

std::size_t window_count(std::size_t frames, std::size_t seq_len, std::size_t stride);

/// Copies the z-scored (C, seq_len, S) block starting at `start` into `out`.
void copy_window_input(const PreparedRecording& rec, std::size_t start, std::size_t seq_len,
                       const InputStats& stats, std::span<float> out);

std::vector<SupervisedWindow> make_windows(const PreparedRecording& rec, std::size_t seq_len,
                                           std::size_t stride, const InputStats& stats);
/// Throws InsufficientData when the recording is shorter than one window.
std::vector<SupervisedWindow> make_windows(const Recording& rec, const PrepareOptions& opts,
                                           std::size_t seq_len, std::size_t stride,
                                           const InputStats& stats);

struct SessionSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Per subject, holds out one seeded-random session for evaluation. Throws
/// ConfigError for a subject with fewer than two sessions.
SessionSplit split_sessions(const std::vector<Recording>& recordings, std::uint64_t seed);

}  // namespace emgforge
