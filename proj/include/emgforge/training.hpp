// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// User-independent training, ablation and tap recipes, and per-subject
// calibration by full-network fine-tuning.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emgforge/dataset.hpp"
#include "emgforge/evaluation.hpp"
#include "emgforge/forcenet.hpp"

namespace emgforge {

enum class TrainMode { joint, l1_only, l2_only, tap };

TrainMode parse_train_mode(const std::string& s);  // joint|l1|l2|tap
std::string to_string(TrainMode m);

struct TrainPlan {
  std::size_t epochs = 30;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  std::size_t batch = 64;
  double lambda = kDefaultLambda;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::joint;
  std::size_t stride = 4;
  /// Optional step schedule: from epoch `lr_drop_epoch` (0-based) on, use `lr_after_drop`.
  std::optional<std::size_t> lr_drop_epoch;
  double lr_after_drop = 0.0;

  /// Tap recipe: 20 epochs, lr 1e-3 dropping to 1e-4 at epoch 10.
  static TrainPlan tap_recipe(std::uint64_t seed);
  double lr_at(std::size_t epoch) const;
  void validate() const;
};

/// One row of "epoch,loss_total,loss_c,loss_r,acc,nrmse,r2"; metrics come from
/// the training forward passes of that epoch.
struct EpochLog {
  std::size_t epoch = 0;
  double loss_total = 0.0;
  double loss_c = 0.0;
  double loss_r = 0.0;
  double acc = 0.0;
  double nrmse = 0.0;
  double r2 = 0.0;
};

std::string loss_log_csv(const std::vector<EpochLog>& log);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Network configuration implied by a training mode on top of `base`.
ForceNetConfig config_for_mode(TrainMode mode, ForceNetConfig base = {});

struct TrainResult {
  ForceNet model;
  std::vector<EpochLog> log;
};

/// Trains a fresh model. Input statistics come from `train_set`. Throws
/// DataError for an empty training set and StateError on a non-finite loss.
TrainResult train(const std::vector<PreparedRecording>& train_set, const TrainPlan& plan,
                  ForceNetConfig base = {}, const EpochCallback& on_epoch = {});

/// Continues training an existing model (optimizer state reset first).
std::vector<EpochLog> fine_tune(ForceNet& model, const std::vector<PreparedRecording>& data, const TrainPlan& plan,
                                const EpochCallback& on_epoch = {});

struct CalibrationPlan {
  double fraction = 0.1;  // of the new subject's first session, in (0, 1]
  double seconds = 0.0;   // absolute amount instead of a fraction when > 0
  double lr = 5e-5;
  std::size_t epochs = 10;
  std::size_t batch = 64;
  std::size_t stride = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Contiguous segment of `rec` of length `seconds`, starting at `start_s`;
/// times are re-based to the segment start.
Recording segment_recording(const Recording& rec, double start_s, double seconds);

/// Picks the calibration segment of `first_session` (seeded random offset).
Recording calibration_segment(const Recording& first_session, const CalibrationPlan& plan);

/// Fine-tunes all layers of `base` on the calibration segment with fresh Adam
/// state; input statistics are kept from the base model.
ForceNet calibrate(const ForceNet& base, const Recording& first_session, const CalibrationPlan& plan,
                   const PrepareOptions& prep = {});

struct SweepRow {
  double fraction = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  Metrics metrics;
};

/// Zero-shot row (fraction 0) followed by one row per (fraction, seed).
std::vector<SweepRow> calibration_sweep(const ForceNet& base, const Recording& first_session,
                                        const std::vector<PreparedRecording>& eval_set,
                                        const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                        CalibrationPlan plan, const EvalOptions& eval = {},
                                        const PrepareOptions& prep = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Deployed post-processing: Gaussian window-10 smoothing of forces, mean
/// window-10 smoothing of tap probabilities.
Series2D postprocess(const Series2D& pred, Task task, std::size_t window = 10);

}  // namespace emgforge
