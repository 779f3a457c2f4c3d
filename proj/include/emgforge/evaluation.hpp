// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Frame accuracy, NRMSE, R^2, tap event extraction/matching, and
// whole-model evaluation over prepared recordings.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emgforge/dataset.hpp"
#include "emgforge/forcenet.hpp"

namespace emgforge {

using Series2D = std::vector<std::vector<float>>;        // [finger][frame]
using Labels2D = std::vector<std::vector<std::uint8_t>>;  // [finger][frame]

/// Fraction of frames on which every finger label matches.
double frame_accuracy(const Labels2D& pred, const Labels2D& truth);
/// sqrt(mean squared error over all fingers and frames) / f_max.
double nrmse(const Series2D& pred, const Series2D& truth, double f_max);
/// 1 - SS_res / SS_tot, pooled over fingers and frames. Throws
/// UndefinedVariance when the truth is constant.
double r_squared(const Series2D& pred, const Series2D& truth);

Labels2D labels_from_force(const Series2D& force, double threshold_n = kLabelThresholdN);

struct TapEvent {
  std::size_t finger = 0;
  double start_s = 0.0;
  double end_s = 0.0;

  double duration_s() const { return end_s - start_s; }
};

double interval_iou(const TapEvent& a, const TapEvent& b);

/// Maximal runs of frames with prob > threshold, per finger. A run of k frames
/// starting at frame j spans [t0 + j dt, t0 + (j + k) dt) and is kept when
/// k dt >= min_dur_s. Sorted by finger, then start.
std::vector<TapEvent> extract_tap_events(const Series2D& prob, double threshold, double min_dur_s,
                                         double frame_dt_s, double t0_s = 0.0);

struct FingerMatch {
  std::size_t tp = 0, fp = 0, fn = 0;
  /// Empty denominators count as perfect (no predictions -> precision 1).
  double precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
};

struct MatchResult {
  std::vector<FingerMatch> fingers;
  double mean_precision() const;
  double mean_recall() const;
  MatchResult& operator+=(const MatchResult& other);
};

/// Greedy one-to-one matching in time order: each prediction takes the
/// earliest unmatched truth event of the same finger with IoU > iou_min.
MatchResult match_events(const std::vector<TapEvent>& pred, const std::vector<TapEvent>& truth,
                         std::size_t fingers = kFingers, double iou_min = 0.5);

std::string events_csv(const std::vector<TapEvent>& events);

// ---------------------------------------------------------------------------
// Model evaluation

enum class Smoothing { none, gaussian, causal };

struct EvalOptions {
  Smoothing smoothing = Smoothing::gaussian;
  std::size_t smooth_window = 10;
  double cutoff_n = kDefaultCutoffN;      // linear head only
  bool accuracy_after_smoothing = true;   // false: labels from the raw series
  std::size_t batch = 64;
  double tap_threshold = 0.3;
  double tap_min_dur_s = 0.1;
};

/// Deployed-signal predictions for one recording: frame t (t >= seq_len - 1)
/// is predicted by the last frame of the stride-1 window ending at t.
struct RecordingPrediction {
  std::string id, subject, action;
  std::size_t first_frame = 0;
  std::vector<double> times_s;
  Series2D raw;       // newtons (force) or probabilities (tap)
  Series2D smoothed;
  Series2D truth;     // newtons
  Labels2D truth_labels;
};

/// Converts head outputs for one frame position to newtons (force models) or
/// leaves probabilities (tap models).
double head_to_output(const ForceNetConfig& cfg, double head_value, double cutoff_n);

/// Head outputs (N, F, L) for windows [start, start + count) of a prepared recording.
nn::Tensor<float> forward_windows(ForceNet& model, const PreparedRecording& rec, std::size_t start,
                                  std::size_t count);

/// Worker count for recording-parallel evaluation: hardware threads, capped
/// by the EMGFORGE_THREADS environment variable.
std::size_t worker_threads();

RecordingPrediction predict_recording(ForceNet& model, const PreparedRecording& rec, const EvalOptions& opts = {});
/// predict_recording over many recordings, spread across worker_threads().
std::vector<RecordingPrediction> predict_all(ForceNet& model, const std::vector<PreparedRecording>& recs,
                                             const EvalOptions& opts = {});
Series2D smooth_series(const Series2D& series, Smoothing kind, std::size_t window, Task task);

struct Metrics {
  double accuracy = 0.0;
  double nrmse = 0.0;
  double r2 = 0.0;  // NaN when undefined
  double nrmse_raw = 0.0;
  double zero_force_fp_rate = 0.0;  // nonzero raw output on frames labelled 0
  std::size_t frames = 0;
};

struct MetricReport {
  Metrics overall;
  std::vector<double> finger_nrmse;
  std::vector<double> finger_r2;
  std::map<std::string, Metrics> per_subject;
  std::map<std::string, Metrics> per_action;

  std::string to_json() const;
  /// One row per group: "group,key,accuracy,nrmse,r2,nrmse_raw,zero_force_fp_rate,frames".
  std::string to_csv() const;
};

Metrics compute_metrics(const std::vector<const RecordingPrediction*>& preds, double f_max, bool after_smoothing);
MetricReport report_from_predictions(const std::vector<RecordingPrediction>& preds, double f_max,
                                     bool after_smoothing = true);
MetricReport evaluate_model(ForceNet& model, const std::vector<PreparedRecording>& recs,
                            const EvalOptions& opts = {});

struct TapReport {
  MatchResult match;
  std::string to_table() const;  // per-finger P/R plus mean
  std::string to_csv() const;
};

/// Tap truth events come from the label runs of each recording (no minimum duration).
TapReport evaluate_taps(ForceNet& model, const std::vector<PreparedRecording>& recs, const EvalOptions& opts = {});
std::vector<TapEvent> truth_tap_events(const RecordingPrediction& pred, double frame_dt_s);

}  // namespace emgforge
