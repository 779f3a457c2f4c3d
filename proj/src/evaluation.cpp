// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "emgforge/error.hpp"
#include "json.hpp"

namespace emgforge {

namespace {

template <typename A, typename B>
void require_same_shape(const std::vector<std::vector<A>>& a, const std::vector<std::vector<B>>& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": finger count " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) {
      throw ShapeError(std::string(what) + ": frame count for finger " + std::to_string(i) + " is " +
                       std::to_string(a[i].size()) + " vs " + std::to_string(b[i].size()));
    }
  }
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["nrmse"] = m.nrmse;
  j["r2"] = std::isfinite(m.r2) ? nlohmann::ordered_json(m.r2) : nlohmann::ordered_json(nullptr);
  j["nrmse_raw"] = m.nrmse_raw;
  j["zero_force_fp_rate"] = m.zero_force_fp_rate;
  j["frames"] = m.frames;
  return j;
}

}  // namespace

double frame_accuracy(const Labels2D& pred, const Labels2D& truth) {
  require_same_shape(pred, truth, "frame_accuracy");
  if (truth.empty() || truth.front().empty()) return 1.0;
  const std::size_t T = truth.front().size();
  std::size_t correct = 0;
  for (std::size_t t = 0; t < T; ++t) {
    bool ok = true;
    for (std::size_t i = 0; i < truth.size() && ok; ++i) ok = (pred[i][t] != 0) == (truth[i][t] != 0);
    correct += ok ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(T);
}

double nrmse(const Series2D& pred, const Series2D& truth, double f_max) {
  require_same_shape(pred, truth, "nrmse");
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t t = 0; t < truth[i].size(); ++t) {
      const double d = static_cast<double>(pred[i][t]) - truth[i][t];
      ss += d * d;
      ++n;
    }
  }
  if (n == 0) throw InsufficientData("nrmse: empty series");
  return std::sqrt(ss / static_cast<double>(n)) / f_max;
}

double r_squared(const Series2D& pred, const Series2D& truth) {
  require_same_shape(pred, truth, "r_squared");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : truth) {
    for (float v : row) sum += v;
    n += row.size();
  }
  if (n == 0) throw InsufficientData("r_squared: empty series");
  const double mean = sum / static_cast<double>(n);
  double res = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t t = 0; t < truth[i].size(); ++t) {
      const double e = static_cast<double>(pred[i][t]) - truth[i][t];
      const double d = static_cast<double>(truth[i][t]) - mean;
      res += e * e;
      tot += d * d;
    }
  }
  if (tot == 0.0) throw UndefinedVariance("r_squared: truth has zero variance");
  return 1.0 - res / tot;
}

Labels2D labels_from_force(const Series2D& force, double threshold_n) {
  Labels2D out(force.size());
  for (std::size_t i = 0; i < force.size(); ++i) {
    out[i].resize(force[i].size());
    for (std::size_t t = 0; t < force[i].size(); ++t) out[i][t] = force[i][t] > threshold_n ? 1 : 0;
  }
  return out;
}

double interval_iou(const TapEvent& a, const TapEvent& b) {
  const double inter = std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
  const double uni = std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<TapEvent> extract_tap_events(const Series2D& prob, double threshold, double min_dur_s,
                                         double frame_dt_s, double t0_s) {
  std::vector<TapEvent> out;
  // tolerance so that k frames of dt count as k*dt exactly
  const double tol = 1e-9 * std::max(1.0, frame_dt_s);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const auto& p = prob[i];
    std::size_t t = 0;
    while (t < p.size()) {
      if (!(p[t] > threshold)) {
        ++t;
        continue;
      }
      const std::size_t begin = t;
      while (t < p.size() && p[t] > threshold) ++t;
      const double dur = static_cast<double>(t - begin) * frame_dt_s;
      if (dur + tol >= min_dur_s) {
        out.push_back({i, t0_s + static_cast<double>(begin) * frame_dt_s, t0_s + static_cast<double>(t) * frame_dt_s});
      }
    }
  }
  return out;
}

double MatchResult::mean_precision() const {
  if (fingers.empty()) return 1.0;
  double s = 0.0;
  for (const auto& f : fingers) s += f.precision();
  return s / static_cast<double>(fingers.size());
}

double MatchResult::mean_recall() const {
  if (fingers.empty()) return 1.0;
  double s = 0.0;
  for (const auto& f : fingers) s += f.recall();
  return s / static_cast<double>(fingers.size());
}

MatchResult& MatchResult::operator+=(const MatchResult& other) {
  if (fingers.size() < other.fingers.size()) fingers.resize(other.fingers.size());
  for (std::size_t i = 0; i < other.fingers.size(); ++i) {
    fingers[i].tp += other.fingers[i].tp;
    fingers[i].fp += other.fingers[i].fp;
    fingers[i].fn += other.fingers[i].fn;
  }
  return *this;
}

MatchResult match_events(const std::vector<TapEvent>& pred, const std::vector<TapEvent>& truth,
                         std::size_t fingers, double iou_min) {
  MatchResult r;
  r.fingers.resize(fingers);
  auto by_time = [](const TapEvent& a, const TapEvent& b) {
    return a.finger != b.finger ? a.finger < b.finger : a.start_s < b.start_s;
  };
  std::vector<TapEvent> ps = pred, ts = truth;
  std::stable_sort(ps.begin(), ps.end(), by_time);
  std::stable_sort(ts.begin(), ts.end(), by_time);
  std::vector<bool> used(ts.size(), false);
  for (const auto& p : ps) {
    if (p.finger >= fingers) throw InvalidArgument("match_events: finger index out of range");
    bool hit = false;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      if (used[k] || ts[k].finger != p.finger) continue;
      if (interval_iou(p, ts[k]) > iou_min) {
        used[k] = true;
        hit = true;
        break;
      }
    }
    (hit ? r.fingers[p.finger].tp : r.fingers[p.finger].fp) += 1;
  }
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ts[k].finger >= fingers) throw InvalidArgument("match_events: finger index out of range");
    if (!used[k]) r.fingers[ts[k].finger].fn += 1;
  }
  return r;
}

std::string events_csv(const std::vector<TapEvent>& events) {
  std::string out = "finger,start_s,end_s\n";
  char buf[96];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", std::string(kFingerNames.at(e.finger)).c_str(), e.start_s,
                  e.end_s);
    out += buf;
  }
  return out;
}

double head_to_output(const ForceNetConfig& cfg, double head_value, double cutoff_n) {
  if (cfg.task == Task::tap) return head_value;
  if (cfg.head == HeadKind::linear) return linear_to_force(head_value, cfg.f_max, cutoff_n);
  return prob_to_force(head_value, cfg.f_max);
}

nn::Tensor<float> forward_windows(ForceNet& model, const PreparedRecording& rec, std::size_t start,
                                  std::size_t count) {
  const auto& cfg = model.config();
  const std::size_t L = cfg.seq_len, S = rec.spec.bins, C = rec.spec.channels;
  if (C != cfg.in_channels || S != cfg.bins) {
    throw ShapeError("forward_windows: recording has " + std::to_string(C) + " channels x " + std::to_string(S) +
                     " bins, model expects " + std::to_string(cfg.in_channels) + " x " + std::to_string(cfg.bins));
  }
  nn::Tensor<float> x({count, C, L, S});
  const std::size_t per = C * L * S;
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t f0 = start + w;
    if (f0 + L > rec.frames()) throw InsufficientData("forward_windows: window past the last frame");
    float* dst = x.data() + w * per;
    for (std::size_t c = 0; c < C; ++c) {
      std::copy_n(&rec.spec.mag[(c * rec.spec.frames + f0) * S], L * S, dst + c * L * S);
    }
    model.normalize_inplace(std::span<float>(dst, per));
  }
  return model.forward(x, Mode::eval);
}

Series2D smooth_series(const Series2D& series, Smoothing kind, std::size_t window, Task task) {
  switch (kind) {
    case Smoothing::none:
      return series;
    case Smoothing::causal:
      return smooth_causal(series, window);
    case Smoothing::gaussian:
      break;
  }
  return smooth(series, task == Task::tap ? SmoothKind::mean : SmoothKind::gaussian, window);
}

RecordingPrediction predict_recording(ForceNet& model, const PreparedRecording& rec, const EvalOptions& opts) {
  const auto& cfg = model.config();
  const std::size_t L = cfg.seq_len;
  const std::size_t n = window_count(rec.frames(), L, 1);
  if (n == 0) throw InsufficientData("predict_recording: " + rec.id + " is shorter than one window");
  RecordingPrediction p;
  p.id = rec.id;
  p.subject = rec.subject;
  p.action = rec.action;
  p.first_frame = L - 1;
  p.times_s.assign(rec.spec.frame_times_s.begin() + static_cast<std::ptrdiff_t>(L - 1), rec.spec.frame_times_s.end());
  p.raw.assign(cfg.outputs, std::vector<float>(n));
  const std::size_t batch = std::max<std::size_t>(1, opts.batch);
  for (std::size_t w0 = 0; w0 < n; w0 += batch) {
    const std::size_t count = std::min(batch, n - w0);
    const auto out = forward_windows(model, rec, w0, count);
    for (std::size_t w = 0; w < count; ++w) {
      for (std::size_t i = 0; i < cfg.outputs; ++i) {
        const double v = out.data()[(w * cfg.outputs + i) * L + (L - 1)];
        p.raw[i][w0 + w] = static_cast<float>(head_to_output(cfg, v, opts.cutoff_n));
      }
    }
  }
  p.smoothed = smooth_series(p.raw, opts.smoothing, opts.smooth_window, cfg.task);
  p.truth.resize(rec.force.size());
  p.truth_labels.resize(rec.labels.size());
  for (std::size_t i = 0; i < rec.force.size(); ++i) {
    p.truth[i].assign(rec.force[i].begin() + static_cast<std::ptrdiff_t>(L - 1), rec.force[i].end());
    p.truth_labels[i].assign(rec.labels[i].begin() + static_cast<std::ptrdiff_t>(L - 1), rec.labels[i].end());
  }
  return p;
}

Metrics compute_metrics(const std::vector<const RecordingPrediction*>& preds, double f_max, bool after_smoothing) {
  Series2D raw(kFingers), sm(kFingers), truth(kFingers);
  Labels2D labels(kFingers);
  for (const auto* p : preds) {
    if (p->raw.size() != kFingers) throw ShapeError("compute_metrics: expected 5 finger outputs");
    for (std::size_t i = 0; i < kFingers; ++i) {
      raw[i].insert(raw[i].end(), p->raw[i].begin(), p->raw[i].end());
      sm[i].insert(sm[i].end(), p->smoothed[i].begin(), p->smoothed[i].end());
      truth[i].insert(truth[i].end(), p->truth[i].begin(), p->truth[i].end());
      labels[i].insert(labels[i].end(), p->truth_labels[i].begin(), p->truth_labels[i].end());
    }
  }
  Metrics m;
  m.frames = truth.front().size();
  if (m.frames == 0) throw InsufficientData("compute_metrics: no frames");
  m.accuracy = frame_accuracy(labels_from_force(after_smoothing ? sm : raw), labels);
  m.nrmse = nrmse(sm, truth, f_max);
  m.nrmse_raw = nrmse(raw, truth, f_max);
  try {
    m.r2 = r_squared(sm, truth);
  } catch (const UndefinedVariance&) {
    m.r2 = std::numeric_limits<double>::quiet_NaN();
  }
  std::size_t zeros = 0, fps = 0;
  for (std::size_t i = 0; i < kFingers; ++i) {
    for (std::size_t t = 0; t < labels[i].size(); ++t) {
      if (labels[i][t] != 0) continue;
      ++zeros;
      fps += raw[i][t] > 0.0f ? 1 : 0;
    }
  }
  m.zero_force_fp_rate = zeros ? static_cast<double>(fps) / static_cast<double>(zeros) : 0.0;
  return m;
}

MetricReport report_from_predictions(const std::vector<RecordingPrediction>& preds, double f_max,
                                     bool after_smoothing) {
  MetricReport r;
  std::vector<const RecordingPrediction*> all;
  std::map<std::string, std::vector<const RecordingPrediction*>> by_subject, by_action;
  for (const auto& p : preds) {
    all.push_back(&p);
    by_subject[p.subject].push_back(&p);
    by_action[p.action].push_back(&p);
  }
  r.overall = compute_metrics(all, f_max, after_smoothing);
  for (const auto& [k, v] : by_subject) r.per_subject[k] = compute_metrics(v, f_max, after_smoothing);
  for (const auto& [k, v] : by_action) r.per_action[k] = compute_metrics(v, f_max, after_smoothing);
  for (std::size_t i = 0; i < kFingers; ++i) {
    Series2D sm(1), truth(1);
    for (const auto* p : all) {
      sm[0].insert(sm[0].end(), p->smoothed[i].begin(), p->smoothed[i].end());
      truth[0].insert(truth[0].end(), p->truth[i].begin(), p->truth[i].end());
    }
    r.finger_nrmse.push_back(nrmse(sm, truth, f_max));
    try {
      r.finger_r2.push_back(r_squared(sm, truth));
    } catch (const UndefinedVariance&) {
      r.finger_r2.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return r;
}

std::size_t worker_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EMGFORGE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

std::vector<RecordingPrediction> predict_all(ForceNet& model, const std::vector<PreparedRecording>& recs,
                                             const EvalOptions& opts) {
  std::vector<RecordingPrediction> preds(recs.size());
  const std::size_t workers = std::min(worker_threads(), recs.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < recs.size(); ++k) preds[k] = predict_recording(model, recs[k], opts);
    return preds;
  }
  // each worker owns a model copy and a disjoint, strided set of recordings
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        ForceNet local = model;
        for (std::size_t k = w; k < recs.size(); k += workers) preds[k] = predict_recording(local, recs[k], opts);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return preds;
}

MetricReport evaluate_model(ForceNet& model, const std::vector<PreparedRecording>& recs, const EvalOptions& opts) {
  if (recs.empty()) throw DataError("evaluate_model: no recordings");
  const auto preds = predict_all(model, recs, opts);
  return report_from_predictions(preds, model.config().f_max, opts.accuracy_after_smoothing);
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["overall"] = metrics_json(overall);
  auto& fingers = j["per_finger"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < finger_nrmse.size(); ++i) {
    fingers[std::string(kFingerNames[i])] = {
        {"nrmse", finger_nrmse[i]},
        {"r2", std::isfinite(finger_r2[i]) ? nlohmann::ordered_json(finger_r2[i]) : nlohmann::ordered_json(nullptr)}};
  }
  auto& subj = j["per_subject"] = nlohmann::ordered_json::object();
  for (const auto& [k, m] : per_subject) subj[k] = metrics_json(m);
  auto& act = j["per_action"] = nlohmann::ordered_json::object();
  for (const auto& [k, m] : per_action) act[k] = metrics_json(m);
  return j.dump(2);
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "group,key,accuracy,nrmse,r2,nrmse_raw,zero_force_fp_rate,frames\n";
  auto row = [&](const std::string& g, const std::string& k, const Metrics& m) {
    os << g << ',' << k << ',' << fmt(m.accuracy) << ',' << fmt(m.nrmse) << ',' << fmt(m.r2) << ','
       << fmt(m.nrmse_raw) << ',' << fmt(m.zero_force_fp_rate) << ',' << m.frames << '\n';
  };
  row("overall", "all", overall);
  for (const auto& [k, m] : per_subject) row("subject", k, m);
  for (const auto& [k, m] : per_action) row("action", k, m);
  return os.str();
}

std::vector<TapEvent> truth_tap_events(const RecordingPrediction& pred, double frame_dt_s) {
  Series2D lab(pred.truth_labels.size());
  for (std::size_t i = 0; i < lab.size(); ++i) {
    lab[i].assign(pred.truth_labels[i].begin(), pred.truth_labels[i].end());
  }
  const double t0 = pred.times_s.empty() ? 0.0 : pred.times_s.front();
  return extract_tap_events(lab, 0.5, 0.0, frame_dt_s, t0);
}

TapReport evaluate_taps(ForceNet& model, const std::vector<PreparedRecording>& recs, const EvalOptions& opts) {
  if (recs.empty()) throw DataError("evaluate_taps: no recordings");
  TapReport rep;
  rep.match.fingers.resize(model.config().outputs);
  for (const auto& p : predict_all(model, recs, opts)) {
    const double dt = p.times_s.size() > 1 ? p.times_s[1] - p.times_s[0] : 0.016;
    const double t0 = p.times_s.empty() ? 0.0 : p.times_s.front();
    const auto pred = extract_tap_events(p.smoothed, opts.tap_threshold, opts.tap_min_dur_s, dt, t0);
    rep.match += match_events(pred, truth_tap_events(p, dt), model.config().outputs);
  }
  return rep;
}

std::string TapReport::to_table() const {
  std::ostringstream os;
  os << "finger     precision  recall   tp   fp   fn\n";
  char buf[128];
  for (std::size_t i = 0; i < match.fingers.size(); ++i) {
    const auto& f = match.fingers[i];
    std::snprintf(buf, sizeof(buf), "%-10s %9.3f %7.3f %4zu %4zu %4zu\n",
                  std::string(i < kFingerNames.size() ? kFingerNames[i] : "?").c_str(), f.precision(), f.recall(), f.tp,
                  f.fp, f.fn);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-10s %9.3f %7.3f\n", "mean", match.mean_precision(), match.mean_recall());
  os << buf;
  return os.str();
}

std::string TapReport::to_csv() const {
  std::ostringstream os;
  os << "finger,precision,recall,tp,fp,fn\n";
  for (std::size_t i = 0; i < match.fingers.size(); ++i) {
    const auto& f = match.fingers[i];
    os << (i < kFingerNames.size() ? kFingerNames[i] : "?") << ',' << fmt(f.precision()) << ',' << fmt(f.recall())
       << ',' << f.tp << ',' << f.fp << ',' << f.fn << '\n';
  }
  os << "mean," << fmt(match.mean_precision()) << ',' << fmt(match.mean_recall()) << ",,,\n";
  return os.str();
}

}  // namespace emgforge
