// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// emgforge: synthetic data, training, calibration, evaluation and streaming.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emgforge/dataset.hpp"
#include "emgforge/error.hpp"
#include "emgforge/evaluation.hpp"
#include "emgforge/forcenet.hpp"
#include "emgforge/streaming.hpp"
#include "emgforge/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace emgforge;

namespace {

/// Missing or unusable inputs named on the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_directory(path)) throw UsageError(std::string(flag) + " " + path + ": no such directory");
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(flag) + " " + path + ": no such file");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

std::string subject_id(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%02zu", k);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Smoothing parse_smoothing(const std::string& s) {
  if (s == "gaussian") return Smoothing::gaussian;
  if (s == "causal") return Smoothing::causal;
  if (s == "none") return Smoothing::none;
  throw UsageError("--smoothing must be gaussian|causal|none");
}

std::vector<PreparedRecording> prepare_all(const std::vector<Recording>& recs, const std::vector<std::size_t>& idx) {
  std::vector<PreparedRecording> out;
  for (auto i : idx) out.push_back(prepare_recording(recs[i]));
  return out;
}

std::vector<std::size_t> select_sessions(const std::vector<Recording>& recs, const std::string& which,
                                         std::uint64_t split_seed) {
  if (which == "all") {
    std::vector<std::size_t> all(recs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const auto split = split_sessions(recs, split_seed);
  if (which == "eval") return split.eval;
  if (which == "train") return split.train;
  throw UsageError("--sessions must be eval|train|all");
}

// Offline force CSV stamped like the streaming frames (time of the newest sample in the window).
std::string prediction_csv(const RecordingPrediction& p, const WindowSpec& w, const Series2D& series) {
  std::vector<ForceFrameMsg> frames(series.front().size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::size_t end = (p.first_frame + k) * w.hop + w.window_len;
    frames[k].timestamp_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(end) * 1e6 / kEmgRateHz));
    for (std::size_t i = 0; i < kFingers; ++i) frames[k].forces[i] = series[i][k];
  }
  return frames_csv(frames);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t subjects = 9;
  std::size_t sessions = 3;
  std::size_t first_subject = 1;
  double duration = 30.0;
  double first_session_duration = 0.0;
  std::string actions = "freeform";
  double variability = 1.0;
  double pulse_rate = -1.0;
  bool tap = false;
};

int cmd_synth(const SynthArgs& a) {
  if (a.subjects == 0 || a.sessions == 0) throw UsageError("--subjects and --sessions must be >= 1");
  std::vector<std::string> actions = split_list(a.actions);
  if (actions.empty()) throw UsageError("--actions is empty");
  for (const auto& act : actions) {
    try {
      action_fingers(act);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  const fs::path root(a.out);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  for (std::size_t k = 0; k < a.subjects; ++k) {
    const std::size_t sidx = a.first_subject + k;
    const std::string sid = subject_id(sidx);
    SyntheticConfig subject = synthetic_subject(a.seed * 1000003ULL + sidx, a.variability);
    subject.subject = sid;
    if (a.tap) {
      subject.min_pulse_s = 0.2;
      subject.max_pulse_s = 0.6;
      subject.pulse_rate_hz = 0.25;
      subject.min_gap_s = 0.3;
      subject.min_peak_fraction = 0.3;
    }
    if (a.pulse_rate >= 0.0) subject.pulse_rate_hz = a.pulse_rate;
    for (std::size_t s = 1; s <= a.sessions; ++s) {
      SyntheticConfig session = synthetic_session(subject, (a.seed * 1000003ULL + sidx) * 31 + s);
      session.session = std::to_string(s);
      for (std::size_t ai = 0; ai < actions.size(); ++ai) {
        session.action = actions[ai];
        session.seed = ((a.seed * 1000003ULL + sidx) * 31 + s) * 97 + ai;
        const double dur = (s == 1 && a.first_session_duration > 0.0) ? a.first_session_duration : a.duration;
        const Recording rec = synth_generate(session, dur);
        const std::string rel = sid + "/" + session.session + "_" + session.action;
        save_recording(rec, root / rel);
        manifest.push_back({rec.id(), rel, rec.subject, rec.session, rec.action, rec.duration_s(),
                            recording_hash(root / rel)});
        std::cout << "wrote " << rel << " (" << dur << " s)\n";
      }
    }
  }
  write_manifest(root, manifest);
  std::cout << manifest.size() << " recordings, manifest " << (root / "manifest.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset, out;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t epochs = 0;  // 0: mode default
  double lr = 0.0;         // 0: mode default
  double lambda = kDefaultLambda;
  std::size_t batch = 64;
  std::size_t stride = 4;
  std::string mode = "joint";
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, bool tap_recipe) {
  require_dir(a.dataset, "--dataset");
  const auto recs = load_dataset(a.dataset);
  if (recs.empty()) throw DataError("dataset " + a.dataset + " lists no recordings");
  const auto split = split_sessions(recs, a.split_seed);
  const auto train_set = prepare_all(recs, split.train);
  const auto eval_set = prepare_all(recs, split.eval);

  TrainPlan plan = tap_recipe ? TrainPlan::tap_recipe(a.seed) : TrainPlan{};
  if (!tap_recipe) plan.mode = parse_train_mode(a.mode);
  plan.seed = a.seed;
  if (a.epochs > 0) plan.epochs = a.epochs;
  if (a.lr > 0.0) plan.lr = a.lr;
  plan.lambda = a.lambda;
  plan.batch = a.batch;
  plan.stride = a.stride;
  plan.validate();

  std::cout << "training " << to_string(plan.mode) << " on " << train_set.size() << " recordings, holding out "
            << eval_set.size() << "\n";
  auto result = train(train_set, plan, {}, [&](const EpochLog& e) {
    if (a.quiet) return;
    std::printf("epoch %3zu  loss %.5f  (c %.5f, r %.5f)  acc %.4f  nrmse %.4f  r2 %.4f\n", e.epoch, e.loss_total,
                e.loss_c, e.loss_r, e.acc, e.nrmse, e.r2);
    std::fflush(stdout);
  });
  const fs::path out(a.out);
  fs::create_directories(out);
  result.model.save(out / "model.efnn");
  write_text(out / "loss_log.csv", loss_log_csv(result.log));
  nlohmann::ordered_json split_json;
  split_json["split_seed"] = a.split_seed;
  for (auto i : split.train) split_json["train"].push_back(recs[i].id());
  for (auto i : split.eval) split_json["eval"].push_back(recs[i].id());
  write_text(out / "split.json", split_json.dump(2) + "\n");
  if (!eval_set.empty()) {
    if (tap_recipe) {
      const auto rep = evaluate_taps(result.model, eval_set);
      write_text(out / "eval_taps.csv", rep.to_csv());
      std::cout << rep.to_table();
    } else {
      const auto rep = evaluate_model(result.model, eval_set);
      write_text(out / "eval_metrics.json", rep.to_json() + "\n");
      write_text(out / "eval_metrics.csv", rep.to_csv());
      std::printf("held-out: accuracy %.4f  nrmse %.4f  r2 %.4f\n", rep.overall.accuracy, rep.overall.nrmse,
                  rep.overall.r2);
    }
  }
  std::cout << "checkpoint " << (out / "model.efnn").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string checkpoint, dataset, out;
  std::uint64_t seed = 0;
  double fraction = 0.1;
  double seconds = 0.0;
  double lr = 5e-5;
  std::size_t epochs = 10;
  bool sweep = false;
  std::string seeds;
};

int cmd_calibrate(const CalibrateArgs& a) {
  require_file(a.checkpoint, "--checkpoint");
  require_dir(a.dataset, "--dataset");
  const ForceNet base = ForceNet::load(a.checkpoint);
  const auto recs = load_dataset(a.dataset);
  std::set<std::string> subjects;
  for (const auto& r : recs) subjects.insert(r.subject);
  if (subjects.size() != 1) throw DataError("calibration dataset must contain exactly one subject");
  std::set<std::string> sessions;
  for (const auto& r : recs) sessions.insert(r.session);
  if (sessions.size() < 2) throw DataError("calibration needs a first session plus at least one held-out session");
  const std::string first = *sessions.begin();
  const Recording* first_rec = nullptr;
  std::vector<PreparedRecording> eval_set;
  for (const auto& r : recs) {
    if (r.session == first && first_rec == nullptr) {
      first_rec = &r;
    } else if (r.session != first) {
      eval_set.push_back(prepare_recording(r));
    }
  }
  CalibrationPlan plan;
  plan.fraction = a.fraction;
  plan.seconds = a.seconds;
  plan.lr = a.lr;
  plan.epochs = a.epochs;
  plan.seed = a.seed;
  plan.validate();
  const fs::path out(a.out);
  fs::create_directories(out);
  if (a.sweep) {
    std::vector<std::uint64_t> seeds;
    for (const auto& s : split_list(a.seeds)) seeds.push_back(std::stoull(s));
    if (seeds.empty()) seeds.push_back(a.seed);
    const auto rows = calibration_sweep(base, *first_rec, eval_set, {0.1, 0.2, 0.3, 0.4, 0.5}, seeds, plan);
    const auto csv = sweep_csv(rows);
    write_text(out / "calibration_sweep.csv", csv);
    std::cout << csv;
    return 0;
  }
  ForceNet zero = base;
  const auto before = evaluate_model(zero, eval_set).overall;
  ForceNet tuned = calibrate(base, *first_rec, plan);
  const auto after = evaluate_model(tuned, eval_set).overall;
  tuned.save(out / "model.efnn");
  auto metrics_json = [](const Metrics& m) {
    nlohmann::ordered_json j{{"accuracy", m.accuracy}, {"nrmse", m.nrmse}, {"frames", m.frames}};
    j["r2"] = std::isfinite(m.r2) ? nlohmann::ordered_json(m.r2) : nlohmann::ordered_json(nullptr);
    return j;
  };
  nlohmann::ordered_json summary;
  summary["seed"] = a.seed;
  summary["calibration_seconds"] = calibration_segment(*first_rec, plan).duration_s();
  summary["zero_shot"] = metrics_json(before);
  summary["calibrated"] = metrics_json(after);
  write_text(out / "calibration.json", summary.dump(2) + "\n");
  std::printf("zero-shot : accuracy %.4f  nrmse %.4f  r2 %.4f\n", before.accuracy, before.nrmse, before.r2);
  std::printf("calibrated: accuracy %.4f  nrmse %.4f  r2 %.4f\n", after.accuracy, after.nrmse, after.r2);
  std::cout << "checkpoint " << (out / "model.efnn").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, dataset, out, predictions, predictions_out;
  std::string sessions = "eval";
  std::uint64_t split_seed = 0;
  std::string smoothing = "gaussian";
  bool raw_accuracy = false;
  double cutoff = kDefaultCutoffN;
  double threshold = 0.3;
};

// Predictions from CSV files "<id>.csv" (t_s + five finger columns), aligned to frames by nearest neighbour.
MetricReport eval_prediction_files(const std::vector<Recording>& recs, const std::vector<std::size_t>& idx,
                                   const fs::path& dir, double f_max) {
  std::vector<RecordingPrediction> preds;
  for (auto i : idx) {
    const PreparedRecording prep = prepare_recording(recs[i]);
    const fs::path file = dir / (prep.id + ".csv");
    std::ifstream in(file);
    if (!in) throw UsageError("missing prediction file " + file.string());
    std::string line;
    std::getline(in, line);
    ForceSeries series;
    series.values.assign(kFingers, {});
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> row;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      if (row.size() != 1 + kFingers) throw FormatError(file.string() + ": expected 6 columns");
      series.times_s.push_back(row[0]);
      for (std::size_t f = 0; f < kFingers; ++f) series.values[f].push_back(static_cast<float>(row[1 + f]));
    }
    const ForceSeries aligned = resample_nearest(series, prep.spec.frame_times_s);
    RecordingPrediction p;
    p.id = prep.id;
    p.subject = prep.subject;
    p.action = prep.action;
    p.times_s = prep.spec.frame_times_s;
    p.raw = aligned.values;
    p.smoothed = aligned.values;
    p.truth = prep.force;
    p.truth_labels = prep.labels;
    preds.push_back(std::move(p));
  }
  return report_from_predictions(preds, f_max);
}

int cmd_eval(const EvalArgs& a, bool tap) {
  require_dir(a.dataset, "--dataset");
  if (a.checkpoint.empty() == a.predictions.empty()) {
    throw UsageError("give exactly one of --checkpoint or --predictions");
  }
  const auto recs = load_dataset(a.dataset);
  const auto idx = select_sessions(recs, a.sessions, a.split_seed);
  if (idx.empty()) throw DataError("no recordings selected");
  const fs::path out = a.out.empty() ? fs::path() : fs::path(a.out);
  if (!a.predictions.empty()) {
    if (tap) throw UsageError("tap-eval needs --checkpoint");
    require_dir(a.predictions, "--predictions");
    const auto rep = eval_prediction_files(recs, idx, a.predictions, 30.0);
    std::printf("accuracy %.4f  nrmse %.4f  r2 %.4f  (%zu frames)\n", rep.overall.accuracy, rep.overall.nrmse,
                rep.overall.r2, rep.overall.frames);
    if (!out.empty()) {
      write_text(out / "metrics.json", rep.to_json() + "\n");
      write_text(out / "metrics.csv", rep.to_csv());
    }
    return 0;
  }
  require_file(a.checkpoint, "--checkpoint");
  ForceNet model = ForceNet::load(a.checkpoint);
  const auto prepared = prepare_all(recs, idx);
  EvalOptions opts;
  opts.smoothing = parse_smoothing(a.smoothing);
  opts.accuracy_after_smoothing = !a.raw_accuracy;
  opts.cutoff_n = a.cutoff;
  opts.tap_threshold = a.threshold;
  if (tap) {
    if (model.config().task != Task::tap) throw UsageError("checkpoint is not a tap model");
    const auto preds = predict_all(model, prepared, opts);
    TapReport rep;
    rep.match.fingers.resize(kFingers);
    std::vector<TapEvent> all_events;
    for (const auto& p : preds) {
      const double dt = p.times_s[1] - p.times_s[0];
      const auto events = extract_tap_events(p.smoothed, opts.tap_threshold, opts.tap_min_dur_s, dt, p.times_s[0]);
      rep.match += match_events(events, truth_tap_events(p, dt));
      all_events.insert(all_events.end(), events.begin(), events.end());
    }
    std::cout << rep.to_table();
    if (!out.empty()) {
      write_text(out / "tap_metrics.csv", rep.to_csv());
      write_text(out / "tap_events.csv", events_csv(all_events));
    }
    return 0;
  }
  if (model.config().task == Task::tap) throw UsageError("checkpoint is a tap model; use tap-eval");
  const auto preds = predict_all(model, prepared, opts);
  const auto rep = report_from_predictions(preds, model.config().f_max, opts.accuracy_after_smoothing);
  std::printf("accuracy %.4f  nrmse %.4f  r2 %.4f  nrmse(unsmoothed) %.4f  zero-force FP %.4f  (%zu frames)\n",
              rep.overall.accuracy, rep.overall.nrmse, rep.overall.r2, rep.overall.nrmse_raw,
              rep.overall.zero_force_fp_rate, rep.overall.frames);
  if (!out.empty()) {
    write_text(out / "metrics.json", rep.to_json() + "\n");
    write_text(out / "metrics.csv", rep.to_csv());
  }
  if (!a.predictions_out.empty()) {
    for (const auto& p : preds) {
      write_text(fs::path(a.predictions_out) / (p.id + ".csv"), prediction_csv(p, WindowSpec{}, p.smoothed));
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct StreamArgs {
  std::string checkpoint, recording, endpoint = "127.0.0.1:7450", out;
  double speed = 1.0;
  double duration = 60.0;
  std::uint64_t seed = 0;
  std::size_t smooth = 10;
};

Recording load_or_synth(const StreamArgs& a) {
  if (!a.recording.empty()) {
    require_dir(a.recording, "--recording");
    return load_recording(a.recording);
  }
  SyntheticConfig cfg = synthetic_subject(a.seed + 1);
  cfg.seed = a.seed;
  return synth_generate(cfg, a.duration);
}

int cmd_replay(const StreamArgs& a, bool broadcast) {
  require_file(a.checkpoint, "--checkpoint");
  if (a.speed < 0.0) throw UsageError("--speed must be >= 0");
  const Recording rec = load_or_synth(a);
  StreamConfig sc;
  sc.smooth_window = a.smooth;
  StreamDecoder decoder(ForceNet::load(a.checkpoint), sc);
  std::unique_ptr<Broadcaster> server;
  if (broadcast) {
    server = std::make_unique<Broadcaster>(a.endpoint);
    std::cout << "broadcasting on port " << server->port() << "\n";
  }
  ReplayOptions ro;
  ro.speed = a.speed;
  const auto res = replay(rec.emg, decoder, ro, [&](const ForceFrameMsg& m) {
    if (server) server->publish(m);
  });
  if (server) server->stop();
  std::cout << res.frames.size() << " frames in " << res.wall_s << " s\n" << res.report.to_text();
  if (!a.out.empty()) write_text(a.out, frames_csv(res.frames));
  return 0;
}

int cmd_bench(const StreamArgs& a) {
  require_file(a.checkpoint, "--checkpoint");
  const Recording rec = load_or_synth(a);
  const ForceNet model = ForceNet::load(a.checkpoint);
  StreamConfig sc;
  sc.smooth_window = a.smooth;
  nlohmann::ordered_json j;
  j["param_count"] = model.param_count();
  j["mac_count"] = model.mac_count();
  std::printf("parameters: %zu\nMACs per window: %zu\n", model.param_count(), model.mac_count());
  {
    StreamDecoder decoder(model, sc);
    const auto res = replay(rec.emg, decoder, ReplayOptions{});
    std::cout << "-- speed 0 (" << res.frames.size() << " frames, " << res.wall_s << " s)\n" << res.report.to_text();
    j["speed0"] = nlohmann::ordered_json::parse(res.report.to_json());
  }
  if (a.speed > 0.0) {
    StreamDecoder decoder(model, sc);
    ReplayOptions ro;
    ro.speed = a.speed;
    const auto res = replay(rec.emg, decoder, ro);
    std::cout << "-- speed " << a.speed << " (" << res.frames.size() << " frames, " << res.wall_s << " s)\n"
              << res.report.to_text();
    j["paced"] = nlohmann::ordered_json::parse(res.report.to_json());
    j["paced"]["speed"] = a.speed;
  }
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emgforge: EMG-to-finger-force decoding toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic EMG-force dataset");
  synth->add_option("--out", sa.out, "Output dataset directory")->required();
  synth->add_option("--seed", sa.seed, "Random seed")->required();
  synth->add_option("--subjects", sa.subjects, "Number of subjects")->capture_default_str();
  synth->add_option("--sessions", sa.sessions, "Sessions per subject")->capture_default_str();
  synth->add_option("--first-subject", sa.first_subject, "Index of the first subject")->capture_default_str();
  synth->add_option("--duration", sa.duration, "Seconds per recording")->capture_default_str();
  synth->add_option("--first-session-duration", sa.first_session_duration,
                    "Seconds for session 1 (0: same as --duration)");
  synth->add_option("--actions", sa.actions, "Comma-separated action labels")->capture_default_str();
  synth->add_option("--variability", sa.variability, "Between-subject variability scale")->capture_default_str();
  synth->add_option("--pulse-rate", sa.pulse_rate, "Force pulses per second per finger");
  synth->add_flag("--tap", sa.tap, "Short tap-like pulses (0.2-0.6 s)");

  TrainArgs ta;
  auto add_train_opts = [&](CLI::App* c, bool with_mode) {
    c->add_option("--dataset", ta.dataset, "Dataset directory")->required();
    c->add_option("--out", ta.out, "Output directory")->required();
    c->add_option("--seed", ta.seed, "Random seed")->required();
    c->add_option("--split-seed", ta.split_seed, "Seed of the held-out session choice")->capture_default_str();
    c->add_option("--epochs", ta.epochs, "Epochs (default 30; tap 20)");
    c->add_option("--lr", ta.lr, "Learning rate (default 1e-4; tap 1e-3 then 1e-4)");
    c->add_option("--lambda", ta.lambda, "Regression weight in the joint loss")->capture_default_str();
    c->add_option("--batch", ta.batch, "Mini-batch size")->capture_default_str();
    c->add_option("--stride", ta.stride, "Training window stride in frames")->capture_default_str();
    if (with_mode) c->add_option("--mode", ta.mode, "joint|l1|l2|tap")->capture_default_str();
    c->add_flag("--quiet", ta.quiet, "No per-epoch output");
  };
  auto* train_cmd = app.add_subcommand("train", "Train a user-independent force model");
  add_train_opts(train_cmd, true);
  auto* tap_train = app.add_subcommand("tap-train", "Train a tap classifier (20 epochs, lr 1e-3 -> 1e-4)");
  add_train_opts(tap_train, false);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Fine-tune a model on a new subject's first session");
  cal->add_option("--checkpoint", ca.checkpoint, "Base checkpoint")->required();
  cal->add_option("--dataset", ca.dataset, "Dataset with the new subject's sessions")->required();
  cal->add_option("--out", ca.out, "Output directory")->required();
  cal->add_option("--seed", ca.seed, "Random seed")->required();
  cal->add_option("--fraction", ca.fraction, "Fraction of the first session")->capture_default_str();
  cal->add_option("--seconds", ca.seconds, "Absolute seconds of calibration data (overrides --fraction)");
  cal->add_option("--lr", ca.lr, "Learning rate")->capture_default_str();
  cal->add_option("--epochs", ca.epochs, "Epochs")->capture_default_str();
  cal->add_flag("--sweep", ca.sweep, "Metrics table for fractions 10..50%");
  cal->add_option("--seeds", ca.seeds, "Comma-separated seeds for --sweep");

  EvalArgs ea;
  auto add_eval_opts = [&](CLI::App* c) {
    c->add_option("--dataset", ea.dataset, "Dataset directory")->required();
    c->add_option("--checkpoint", ea.checkpoint, "Model checkpoint");
    c->add_option("--out", ea.out, "Directory for metric reports");
    c->add_option("--sessions", ea.sessions, "eval|train|all")->capture_default_str();
    c->add_option("--split-seed", ea.split_seed, "Seed of the held-out session choice")->capture_default_str();
    c->add_option("--smoothing", ea.smoothing, "gaussian|causal|none")->capture_default_str();
  };
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a force model (or prediction files)");
  add_eval_opts(eval_cmd);
  eval_cmd->add_option("--predictions", ea.predictions, "Directory of <id>.csv predictions to score");
  eval_cmd->add_option("--predictions-out", ea.predictions_out, "Write per-recording force CSVs here");
  eval_cmd->add_flag("--raw-accuracy", ea.raw_accuracy, "Frame accuracy from the unsmoothed series");
  eval_cmd->add_option("--cutoff", ea.cutoff, "Linear-head cutoff in newtons")->capture_default_str();
  auto* tap_eval = app.add_subcommand("tap-eval", "Tap event precision/recall per finger");
  add_eval_opts(tap_eval);
  tap_eval->add_option("--threshold", ea.threshold, "Probability threshold")->capture_default_str();

  StreamArgs st;
  auto add_stream_opts = [&](CLI::App* c, bool endpoint) {
    c->add_option("--checkpoint", st.checkpoint, "Model checkpoint")->required();
    c->add_option("--recording", st.recording, "Recording directory (default: synthetic)");
    c->add_option("--duration", st.duration, "Synthetic recording seconds")->capture_default_str();
    c->add_option("--seed", st.seed, "Seed for the synthetic recording")->capture_default_str();
    c->add_option("--smooth", st.smooth, "Causal smoothing window in frames")->capture_default_str();
    c->add_option("--out", st.out, "Output file");
    if (endpoint) c->add_option("--endpoint", st.endpoint, "host:port to serve on")->capture_default_str();
  };
  auto* stream = app.add_subcommand("stream", "Decode a paced recording and broadcast force frames over TCP");
  add_stream_opts(stream, true);
  stream->add_option("--speed", st.speed, "Replay speed (1 = real time)")->capture_default_str();
  auto* replay_cmd = app.add_subcommand("replay", "Replay a recording through the streaming decoder");
  add_stream_opts(replay_cmd, false);
  replay_cmd->add_option("--speed", st.speed, "Replay speed (0 = as fast as possible)")->capture_default_str();
  auto* bench = app.add_subcommand("bench", "Latency report for the streaming decoder");
  add_stream_opts(bench, false);
  bench->add_option("--speed", st.speed, "Also run a paced replay at this speed (0: skip)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(sa);
    if (train_cmd->parsed()) return cmd_train(ta, false);
    if (tap_train->parsed()) return cmd_train(ta, true);
    if (cal->parsed()) return cmd_calibrate(ca);
    if (eval_cmd->parsed()) return cmd_eval(ea, false);
    if (tap_eval->parsed()) return cmd_eval(ea, true);
    if (stream->parsed()) return cmd_replay(st, true);
    if (replay_cmd->parsed()) {
      if (!replay_cmd->count("--speed")) st.speed = 0.0;
      return cmd_replay(st, false);
    }
    if (bench->parsed()) {
      if (!bench->count("--speed")) st.speed = 0.0;
      return cmd_bench(st);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
