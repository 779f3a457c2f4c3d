// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "emgforge/error.hpp"

namespace emgforge {

TrainMode parse_train_mode(const std::string& s) {
  if (s == "joint") return TrainMode::joint;
  if (s == "l1" || s == "l1_only") return TrainMode::l1_only;
  if (s == "l2" || s == "l2_only") return TrainMode::l2_only;
  if (s == "tap") return TrainMode::tap;
  throw ConfigError("unknown training mode '" + s + "' (joint|l1|l2|tap)");
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::joint: return "joint";
    case TrainMode::l1_only: return "l1";
    case TrainMode::l2_only: return "l2";
    case TrainMode::tap: return "tap";
  }
  return "?";
}

TrainPlan TrainPlan::tap_recipe(std::uint64_t seed) {
  TrainPlan p;
  p.mode = TrainMode::tap;
  p.epochs = 20;
  p.lr = 1e-3;
  p.lr_drop_epoch = 10;
  p.lr_after_drop = 1e-4;
  p.seed = seed;
  return p;
}

double TrainPlan::lr_at(std::size_t epoch) const {
  return lr_drop_epoch && epoch >= *lr_drop_epoch ? lr_after_drop : lr;
}

void TrainPlan::validate() const {
  if (epochs < 1) throw ConfigError("train plan: epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train plan: lr must be positive");
  if (batch < 1) throw ConfigError("train plan: batch must be >= 1");
  if (stride < 1) throw ConfigError("train plan: stride must be >= 1");
  if (lr_drop_epoch && !(lr_after_drop > 0.0)) throw ConfigError("train plan: lr after drop must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train plan: betas in [0, 1)");
  if (weight_decay < 0.0 || lambda < 0.0) throw ConfigError("train plan: weight decay and lambda must be >= 0");
}

std::string loss_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,loss_total,loss_c,loss_r,acc,nrmse,r2\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.loss_total, e.loss_c, e.loss_r,
                  e.acc, e.nrmse, e.r2);
    out += buf;
  }
  return out;
}

ForceNetConfig config_for_mode(TrainMode mode, ForceNetConfig base) {
  switch (mode) {
    case TrainMode::joint:
      base.head = HeadKind::sigmoid;
      base.task = Task::force;
      break;
    case TrainMode::l1_only:
    case TrainMode::l2_only:
      base.head = HeadKind::linear;
      base.task = Task::force;
      break;
    case TrainMode::tap:
      base.head = HeadKind::sigmoid;
      base.task = Task::tap;
      break;
  }
  return base;
}

namespace {

struct WindowRef {
  std::size_t rec;
  std::size_t start;
};

// Running sums for the per-epoch training metrics.
struct EpochStats {
  double loss_total = 0, loss_c = 0, loss_r = 0;
  std::size_t batches = 0;
  std::size_t frames = 0, correct = 0;
  double ss_res = 0, sum_y = 0, sum_y2 = 0;
  std::size_t values = 0;
};

std::vector<EpochLog> run_training(ForceNet& model, const std::vector<PreparedRecording>& data, const TrainPlan& plan,
                                   const EpochCallback& on_epoch) {
  plan.validate();
  const auto& cfg = model.config();
  const std::size_t L = cfg.seq_len, F = cfg.outputs;
  if (F != kFingers) throw ConfigError("training: model must have 5 outputs");

  std::vector<WindowRef> windows;
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data[r].spec.channels != cfg.in_channels || data[r].spec.bins != cfg.bins) {
      throw ShapeError("training: recording " + data[r].id + " does not match the model input shape");
    }
    const std::size_t n = window_count(data[r].frames(), L, plan.stride);
    for (std::size_t w = 0; w < n; ++w) windows.push_back({r, w * plan.stride});
  }
  if (windows.empty()) throw DataError("training: no windows in the training set");

  const std::size_t C = cfg.in_channels, S = cfg.bins, per = C * L * S;
  const bool tap = cfg.task == Task::tap;
  const bool linear = cfg.head == HeadKind::linear;
  const auto reg_kind = plan.mode == TrainMode::l1_only ? RegressionKind::l1 : RegressionKind::l2;
  const double lambda = tap ? 0.0 : plan.lambda;

  std::mt19937_64 rng(plan.seed);
  std::vector<EpochLog> log;
  model.reset_optimizer();
  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    std::shuffle(windows.begin(), windows.end(), rng);
    nn::AdamConfig adam{plan.lr_at(epoch), plan.beta1, plan.beta2, plan.weight_decay, 1e-8};
    EpochStats st;
    for (std::size_t b0 = 0, batch_idx = 0; b0 < windows.size(); b0 += plan.batch, ++batch_idx) {
      const std::size_t nb = std::min(plan.batch, windows.size() - b0);
      nn::Tensor<float> x({nb, C, L, S});
      std::vector<float> force(nb * F * L);
      std::vector<std::uint8_t> labels(nb * F * L);
      for (std::size_t k = 0; k < nb; ++k) {
        const auto& ref = windows[b0 + k];
        const auto& rec = data[ref.rec];
        float* dst = x.data() + k * per;
        for (std::size_t c = 0; c < C; ++c) {
          std::copy_n(&rec.spec.mag[(c * rec.spec.frames + ref.start) * S], L * S, dst + c * L * S);
        }
        model.normalize_inplace(std::span<float>(dst, per));
        for (std::size_t i = 0; i < F; ++i) {
          for (std::size_t t = 0; t < L; ++t) {
            force[(k * F + i) * L + t] = rec.force[i][ref.start + t];
            labels[(k * F + i) * L + t] = rec.labels[i][ref.start + t];
          }
        }
      }

      ForwardTape<float> tape;
      const auto z = model.forward_logits(x, Mode::train, &tape);
      nn::Tensor<float> grad(z.shape());
      std::vector<float> out(z.size());
      LossBreakdown lb;
      if (linear) {
        std::copy(z.data(), z.data() + z.size(), out.begin());
        lb.regression = regression_only_loss<float>(out, force, cfg.f_max, reg_kind, grad.span());
        lb.total = lb.regression;
      } else {
        const auto p = nn::sigmoid(z);
        std::copy(p.data(), p.data() + p.size(), out.begin());
        lb = joint_loss<float>(out, labels, force, cfg.f_max, lambda, {}, grad.span());
        if (tap) lb.regression = 0.0;  // no force term in tap mode
      }
      if (!std::isfinite(lb.total)) {
        throw StateError("training: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                         std::to_string(batch_idx + 1) + " (lr " + std::to_string(adam.lr) + ")");
      }
      model.zero_grad();
      model.backward(tape, grad);
      nn::adam_step(model.params(), adam);

      st.loss_total += lb.total;
      st.loss_c += lb.classification;
      st.loss_r += lb.regression;
      st.batches += 1;
      for (std::size_t k = 0; k < nb; ++k) {
        for (std::size_t t = 0; t < L; ++t) {
          bool ok = true;
          for (std::size_t i = 0; i < F; ++i) {
            const std::size_t idx = (k * F + i) * L + t;
            const double v = out[idx];
            const bool pred = tap ? v > 0.5 : force_label(head_to_output(cfg, v, kDefaultCutoffN)) != 0;
            ok = ok && pred == (labels[idx] != 0);
            if (!tap) {
              const double y = force[idx];
              const double e = head_to_output(cfg, v, kDefaultCutoffN) - y;
              st.ss_res += e * e;
              st.sum_y += y;
              st.sum_y2 += y * y;
              st.values += 1;
            }
          }
          st.correct += ok ? 1 : 0;
          st.frames += 1;
        }
      }
    }
    EpochLog e;
    e.epoch = epoch + 1;
    e.loss_total = st.loss_total / static_cast<double>(st.batches);
    e.loss_c = st.loss_c / static_cast<double>(st.batches);
    e.loss_r = st.loss_r / static_cast<double>(st.batches);
    e.acc = static_cast<double>(st.correct) / static_cast<double>(st.frames);
    if (st.values > 0) {
      const double n = static_cast<double>(st.values);
      e.nrmse = std::sqrt(st.ss_res / n) / cfg.f_max;
      const double tot = st.sum_y2 - st.sum_y * st.sum_y / n;
      e.r2 = tot > 0.0 ? 1.0 - st.ss_res / tot : std::numeric_limits<double>::quiet_NaN();
    } else {
      e.nrmse = e.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return log;
}

}  // namespace

TrainResult train(const std::vector<PreparedRecording>& train_set, const TrainPlan& plan, ForceNetConfig base,
                  const EpochCallback& on_epoch) {
  plan.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  ForceNetConfig cfg = config_for_mode(plan.mode, std::move(base));
  cfg.lambda = plan.lambda;
  cfg.calibrated = false;
  ForceNet model(cfg, plan.seed);
  std::vector<const PreparedRecording*> ptrs;
  for (const auto& r : train_set) ptrs.push_back(&r);
  const auto stats = compute_input_stats(ptrs);
  model.set_input_stats(stats.mean, stats.std);
  auto log = run_training(model, train_set, plan, on_epoch);
  return TrainResult{std::move(model), std::move(log)};
}

std::vector<EpochLog> fine_tune(ForceNet& model, const std::vector<PreparedRecording>& data, const TrainPlan& plan,
                                const EpochCallback& on_epoch) {
  if (data.empty()) throw DataError("fine_tune: empty data set");
  return run_training(model, data, plan, on_epoch);
}

void CalibrationPlan::validate() const {
  if (seconds <= 0.0 && !(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("calibration: fraction " + std::to_string(fraction) + " outside (0, 1]");
  }
  if (seconds < 0.0) throw ConfigError("calibration: seconds must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("calibration: lr must be positive");
  if (batch < 1 || stride < 1) throw ConfigError("calibration: batch and stride must be >= 1");
}

Recording segment_recording(const Recording& rec, double start_s, double seconds) {
  Recording out;
  out.subject = rec.subject;
  out.session = rec.session;
  out.action = rec.action;
  out.hand = rec.hand;
  out.emg.rate_hz = rec.emg.rate_hz;
  const auto s0 = static_cast<std::size_t>(std::llround(start_s * rec.emg.rate_hz));
  const auto n = static_cast<std::size_t>(std::llround(seconds * rec.emg.rate_hz));
  if (s0 + n > rec.emg.length()) throw InvalidArgument("segment_recording: segment past the end of the recording");
  for (const auto& ch : rec.emg.samples) {
    out.emg.samples.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(s0),
                                 ch.begin() + static_cast<std::ptrdiff_t>(s0 + n));
  }
  const double t0 = static_cast<double>(s0) / rec.emg.rate_hz;
  const double t1 = static_cast<double>(s0 + n) / rec.emg.rate_hz;
  out.force.values.assign(rec.force.fingers(), {});
  for (std::size_t k = 0; k < rec.force.length(); ++k) {
    const double t = rec.force.times_s[k];
    if (t < t0 || t >= t1) continue;
    out.force.times_s.push_back(t - t0);
    for (std::size_t i = 0; i < rec.force.fingers(); ++i) out.force.values[i].push_back(rec.force.values[i][k]);
  }
  return out;
}

Recording calibration_segment(const Recording& first_session, const CalibrationPlan& plan) {
  plan.validate();
  const double total = first_session.duration_s();
  const double want = plan.seconds > 0.0 ? plan.seconds : plan.fraction * total;
  if (want > total + 1e-9) {
    throw ConfigError("calibration: requested " + std::to_string(want) + " s from a " + std::to_string(total) +
                      " s session");
  }
  const double seconds = std::min(want, total);
  std::mt19937_64 rng(plan.seed);
  const double slack = total - seconds;
  const double start = slack > 0.0 ? std::uniform_real_distribution<double>(0.0, slack)(rng) : 0.0;
  return segment_recording(first_session, std::floor(start * first_session.emg.rate_hz) / first_session.emg.rate_hz,
                           seconds);
}

ForceNet calibrate(const ForceNet& base, const Recording& first_session, const CalibrationPlan& plan,
                   const PrepareOptions& prep) {
  plan.validate();
  ForceNet model = base;
  if (plan.epochs == 0) return model;
  const Recording seg = calibration_segment(first_session, plan);
  std::vector<PreparedRecording> data{prepare_recording(seg, prep)};
  TrainPlan tp;
  tp.epochs = plan.epochs;
  tp.lr = plan.lr;
  tp.batch = plan.batch;
  tp.stride = plan.stride;
  tp.seed = plan.seed;
  tp.lambda = base.config().lambda;
  tp.mode = base.config().task == Task::tap ? TrainMode::tap
            : base.config().head == HeadKind::linear ? TrainMode::l2_only
                                                      : TrainMode::joint;
  fine_tune(model, data, tp);
  model.mutable_config().calibrated = true;
  return model;
}

std::vector<SweepRow> calibration_sweep(const ForceNet& base, const Recording& first_session,
                                        const std::vector<PreparedRecording>& eval_set,
                                        const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                        CalibrationPlan plan, const EvalOptions& eval, const PrepareOptions& prep) {
  std::vector<SweepRow> rows;
  {
    ForceNet zero = base;
    rows.push_back({0.0, 0.0, 0, evaluate_model(zero, eval_set, eval).overall});
  }
  for (double f : fractions) {
    for (auto seed : seeds) {
      plan.fraction = f;
      plan.seconds = 0.0;
      plan.seed = seed;
      ForceNet m = calibrate(base, first_session, plan, prep);
      rows.push_back({f, f * first_session.duration_s(), seed, evaluate_model(m, eval_set, eval).overall});
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "fraction,seconds,seed,accuracy,nrmse,r2\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.3f,%llu,%.6f,%.6f,%.6f\n", r.fraction, r.seconds,
                  static_cast<unsigned long long>(r.seed), r.metrics.accuracy, r.metrics.nrmse, r.metrics.r2);
    os << buf;
  }
  return os.str();
}

Series2D postprocess(const Series2D& pred, Task task, std::size_t window) {
  return smooth(pred, task == Task::tap ? SmoothKind::mean : SmoothKind::gaussian, window);
}

}  // namespace emgforge
