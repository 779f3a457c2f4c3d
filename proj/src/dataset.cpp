// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include "json.hpp"
#include <random>
#include <set>
#include <sstream>

#include "emgforge/bytes.hpp"
#include "emgforge/error.hpp"
#include "emgforge/forcenet.hpp"

namespace emgforge {

namespace fs = std::filesystem;

std::vector<std::size_t> action_fingers(std::string_view action) {
  if (action == kFreeform) return {0, 1, 2, 3, 4};
  if (action == "press_thumb") return {0};
  if (action == "press_index") return {1};
  if (action == "press_middle") return {2};
  if (action == "press_ring") return {3};
  if (action == "press_pinky") return {4};
  if (action == "press_four") return {1, 2, 3, 4};
  if (action == "pinch_index") return {0, 1};
  if (action == "pinch_middle") return {0, 2};
  if (action == "pinch_ring") return {0, 3};
  if (action == "pinch_pinky") return {0, 4};
  if (action == "pinch_all") return {0, 1, 2, 3, 4};
  throw ConfigError("unknown action label '" + std::string(action) + "'");
}

void Recording::validate() const {
  try {
    emg.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("recording ") + id() + ": " + e.what());
  }
  if (force.fingers() != kFingers) throw DataError("recording " + id() + ": expected 5 force rows");
  for (const auto& row : force.values) {
    if (row.size() != force.length()) throw DataError("recording " + id() + ": ragged force rows");
    for (float v : row) {
      if (!std::isfinite(v) || v < 0.0f || v > kMaxRecordedForceN) {
        throw DataError("recording " + id() + ": force value " + std::to_string(v) + " outside [0, 35] N");
      }
    }
  }
  if (force.length() < 2) throw DataError("recording " + id() + ": fewer than two force samples");
  const double span = force.times_s.back() - force.times_s.front();
  const double rate = static_cast<double>(force.length() - 1) / span;
  if (!(span > 0.0) || rate < 100.0 || rate > 150.0) {
    throw DataError("recording " + id() + ": force rate " + std::to_string(rate) + " Hz outside [100, 150]");
  }
  const double emg_end = duration_s();
  if (force.times_s.front() >= emg_end || force.times_s.back() <= 0.0) {
    throw DataError("recording " + id() + ": EMG and force time ranges do not overlap");
  }
}

namespace {

const char* hand_name(Hand h) { return h == Hand::left ? "left" : "right"; }

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + p.string());
}

template <typename V>
V meta_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("meta.json: missing field '") + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("meta.json: bad type for field '") + key + "'");
  }
}

}  // namespace

void save_recording(const Recording& rec, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["subject"] = rec.subject;
  meta["session"] = rec.session;
  meta["action"] = rec.action;
  meta["hand"] = hand_name(rec.hand);
  meta["emg_rate_hz"] = rec.emg.rate_hz;
  meta["force_rate_hz"] = kForceRateHz;
  meta["channels"] = rec.emg.channels();
  meta["emg_samples"] = rec.emg.length();
  meta["force_samples"] = rec.force.length();
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::vector<std::uint8_t> emg;
  const std::size_t n = rec.emg.length(), C = rec.emg.channels();
  emg.reserve(n * C * 4);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < C; ++c) bytes::put_f32(emg, rec.emg.samples[c][s]);
  }
  {
    std::ofstream f(dir / "emg.bin", std::ios::binary);
    if (!f) throw IoError("cannot open " + (dir / "emg.bin").string() + " for writing");
    f.write(reinterpret_cast<const char*>(emg.data()), static_cast<std::streamsize>(emg.size()));
  }

  std::string csv = "t_s";
  for (auto name : kFingerNames) csv += "," + std::string(name);
  csv += "\n";
  char buf[64];
  for (std::size_t j = 0; j < rec.force.length(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.17g", rec.force.times_s[j]);
    csv += buf;
    for (std::size_t i = 0; i < rec.force.fingers(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(rec.force.values[i][j]));
      csv += buf;
    }
    csv += "\n";
  }
  write_file(dir / "force.csv", csv);
}

Recording load_recording(const fs::path& dir) {
  Recording rec;
  nlohmann::json meta;
  {
    const auto raw = read_file(dir / "meta.json");
    try {
      meta = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("meta.json: ") + e.what());
    }
  }
  rec.subject = meta_field<std::string>(meta, "subject");
  rec.session = meta_field<std::string>(meta, "session");
  rec.action = meta_field<std::string>(meta, "action");
  const auto hand = meta_field<std::string>(meta, "hand");
  if (hand != "left" && hand != "right") throw FormatError("meta.json: field 'hand' must be left|right");
  rec.hand = hand == "left" ? Hand::left : Hand::right;
  rec.emg.rate_hz = meta_field<double>(meta, "emg_rate_hz");
  if (!(rec.emg.rate_hz > 0.0)) throw FormatError("meta.json: field 'emg_rate_hz' must be positive");
  const double force_rate = meta_field<double>(meta, "force_rate_hz");
  if (force_rate < 100.0 || force_rate > 150.0) {
    throw FormatError("meta.json: field 'force_rate_hz' outside [100, 150]");
  }
  const auto channels = meta_field<std::size_t>(meta, "channels");
  const auto emg_samples = meta_field<std::size_t>(meta, "emg_samples");
  const auto force_samples = meta_field<std::size_t>(meta, "force_samples");
  if (channels == 0) throw FormatError("meta.json: field 'channels' must be positive");

  const auto emg = read_file(dir / "emg.bin");
  if (emg.size() != emg_samples * channels * 4) {
    throw FormatError("emg.bin: size " + std::to_string(emg.size()) + " bytes, meta.json implies " +
                      std::to_string(emg_samples * channels * 4));
  }
  rec.emg.samples.assign(channels, std::vector<float>(emg_samples));
  for (std::size_t s = 0; s < emg_samples; ++s) {
    for (std::size_t c = 0; c < channels; ++c) {
      rec.emg.samples[c][s] = bytes::get_f32(std::span(emg).subspan((s * channels + c) * 4, 4));
    }
  }

  std::ifstream csv(dir / "force.csv");
  if (!csv) throw IoError("cannot open " + (dir / "force.csv").string());
  std::string line;
  std::getline(csv, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_s,thumb,index,middle,ring,pinky") throw FormatError("force.csv: bad header '" + line + "'");
  rec.force.values.assign(kFingers, {});
  while (std::getline(csv, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw FormatError("force.csv: non-numeric cell '" + cell + "' at row " +
                          std::to_string(rec.force.length() + 1));
      }
    }
    if (row.size() != 1 + kFingers) {
      throw FormatError("force.csv: row " + std::to_string(rec.force.length() + 1) + " has " +
                        std::to_string(row.size()) + " columns");
    }
    rec.force.times_s.push_back(row[0]);
    for (std::size_t i = 0; i < kFingers; ++i) rec.force.values[i].push_back(static_cast<float>(row[1 + i]));
  }
  if (rec.force.length() != force_samples) {
    throw FormatError("force.csv: " + std::to_string(rec.force.length()) + " rows, meta.json field "
                      "'force_samples' says " + std::to_string(force_samples));
  }
  return rec;
}

std::string recording_hash(const fs::path& dir) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char* name : {"meta.json", "emg.bin", "force.csv"}) {
    for (std::uint8_t b : read_file(dir / name)) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const fs::path& root, const std::vector<ManifestEntry>& entries) {
  nlohmann::ordered_json j;
  j["format"] = "emgforge-dataset";
  j["version"] = 1;
  auto& arr = j["recordings"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json r;
    r["id"] = e.id;
    r["path"] = e.path;
    r["subject"] = e.subject;
    r["session"] = e.session;
    r["action"] = e.action;
    r["duration_s"] = e.duration_s;
    r["hash"] = e.hash;
    arr.push_back(r);
  }
  write_file(root / "manifest.json", j.dump(2) + "\n");
}

std::vector<ManifestEntry> read_manifest(const fs::path& root) {
  const auto raw = read_file(root / "manifest.json");
  std::vector<ManifestEntry> out;
  try {
    const auto j = nlohmann::json::parse(raw.begin(), raw.end());
    for (const auto& r : j.at("recordings")) {
      ManifestEntry e;
      e.id = r.at("id").get<std::string>();
      e.path = r.at("path").get<std::string>();
      e.subject = r.at("subject").get<std::string>();
      e.session = r.at("session").get<std::string>();
      e.action = r.at("action").get<std::string>();
      e.duration_s = r.value("duration_s", 0.0);
      e.hash = r.value("hash", std::string());
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  return out;
}

std::vector<Recording> load_dataset(const fs::path& root) {
  std::vector<Recording> out;
  for (const auto& e : read_manifest(root)) out.push_back(load_recording(root / e.path));
  return out;
}

Spectrogram prepare_emg(const EmgBuffer& emg, const PrepareOptions& opts, std::size_t first_sample_index) {
  Spectrogram sg = crop_bins(stft_magnitude(emg, opts.window, first_sample_index), opts.window.bins_kept);
  if (opts.log_magnitude) sg = log_compress(sg, opts.log_eps);
  return sg;
}

PreparedRecording prepare_recording(const Recording& rec, const PrepareOptions& opts) {
  PreparedRecording p;
  p.id = rec.id();
  p.subject = rec.subject;
  p.session = rec.session;
  p.action = rec.action;
  p.spec = prepare_emg(rec.emg, opts);
  const ForceSeries aligned = resample_nearest(rec.force, p.spec.frame_times_s);
  p.force = aligned.values;
  p.labels.assign(p.force.size(), std::vector<std::uint8_t>(p.spec.frames));
  for (std::size_t i = 0; i < p.force.size(); ++i) {
    for (std::size_t t = 0; t < p.spec.frames; ++t) p.labels[i][t] = force_label(p.force[i][t]);
  }
  return p;
}

InputStats compute_input_stats(const std::vector<const PreparedRecording*>& recs) {
  if (recs.empty()) throw InsufficientData("compute_input_stats: no recordings");
  const std::size_t C = recs.front()->spec.channels;
  std::vector<double> sum(C, 0.0), sq(C, 0.0), count(C, 0.0);
  for (const auto* r : recs) {
    if (r->spec.channels != C) throw ShapeError("compute_input_stats: channel count differs between recordings");
    const std::size_t per = r->spec.frames * r->spec.bins;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t k = 0; k < per; ++k) {
        const double v = r->spec.mag[c * per + k];
        sum[c] += v;
        sq[c] += v * v;
      }
      count[c] += static_cast<double>(per);
    }
  }
  InputStats s;
  for (std::size_t c = 0; c < C; ++c) {
    const double mean = sum[c] / count[c];
    const double var = std::max(sq[c] / count[c] - mean * mean, 0.0);
    s.mean.push_back(mean);
    s.std.push_back(std::max(std::sqrt(var), 1e-6));
  }
  return s;
}

std::size_t window_count(std::size_t frames, std::size_t seq_len, std::size_t stride) {
  if (frames < seq_len || stride == 0) return 0;
  return (frames - seq_len) / stride + 1;
}

void copy_window_input(const PreparedRecording& rec, std::size_t start, std::size_t seq_len,
                       const InputStats& stats, std::span<float> out) {
  const auto& sg = rec.spec;
  if (start + seq_len > sg.frames) throw InsufficientData("window extends past the last frame");
  if (out.size() != sg.channels * seq_len * sg.bins) throw ShapeError("copy_window_input: output size mismatch");
  if (stats.mean.size() != sg.channels || stats.std.size() != sg.channels) {
    throw ShapeError("copy_window_input: stats channel count mismatch");
  }
  for (std::size_t c = 0; c < sg.channels; ++c) {
    const float mean = static_cast<float>(stats.mean[c]);
    const float inv = 1.0f / static_cast<float>(stats.std[c]);
    const float* src = &sg.mag[(c * sg.frames + start) * sg.bins];
    float* dst = &out[c * seq_len * sg.bins];
    for (std::size_t k = 0; k < seq_len * sg.bins; ++k) dst[k] = (src[k] - mean) * inv;
  }
}

std::vector<SupervisedWindow> make_windows(const PreparedRecording& rec, std::size_t seq_len,
                                           std::size_t stride, const InputStats& stats) {
  const std::size_t n = window_count(rec.frames(), seq_len, stride);
  if (n == 0) {
    throw InsufficientData("make_windows: " + std::to_string(rec.frames()) + " frames, need " +
                           std::to_string(seq_len));
  }
  std::vector<SupervisedWindow> out(n);
  for (std::size_t w = 0; w < n; ++w) {
    auto& sw = out[w];
    sw.start_frame = w * stride;
    sw.input.resize(rec.spec.channels * seq_len * rec.spec.bins);
    copy_window_input(rec, sw.start_frame, seq_len, stats, sw.input);
    sw.force.resize(rec.force.size());
    sw.labels.resize(rec.labels.size());
    for (std::size_t i = 0; i < rec.force.size(); ++i) {
      const auto b = static_cast<std::ptrdiff_t>(sw.start_frame), e = b + static_cast<std::ptrdiff_t>(seq_len);
      sw.force[i].assign(rec.force[i].begin() + b, rec.force[i].begin() + e);
      sw.labels[i].assign(rec.labels[i].begin() + b, rec.labels[i].begin() + e);
    }
  }
  return out;
}

std::vector<SupervisedWindow> make_windows(const Recording& rec, const PrepareOptions& opts,
                                           std::size_t seq_len, std::size_t stride,
                                           const InputStats& stats) {
  if (rec.emg.length() < opts.window.window_len) {
    throw InsufficientData("make_windows: recording " + rec.id() + " is shorter than one STFT window");
  }
  return make_windows(prepare_recording(rec, opts), seq_len, stride, stats);
}

SessionSplit split_sessions(const std::vector<Recording>& recordings, std::uint64_t seed) {
  std::map<std::string, std::set<std::string>> sessions;
  for (const auto& r : recordings) sessions[r.subject].insert(r.session);
  std::mt19937_64 rng(seed);
  std::map<std::string, std::string> held_out;
  for (const auto& [subject, set] : sessions) {
    if (set.size() < 2) {
      throw ConfigError("split_sessions: subject " + subject + " has " + std::to_string(set.size()) +
                        " session(s), need >= 2");
    }
    std::vector<std::string> list(set.begin(), set.end());
    std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
    held_out[subject] = list[pick(rng)];
  }
  SessionSplit split;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    (recordings[i].session == held_out[recordings[i].subject] ? split.eval : split.train).push_back(i);
  }
  return split;
}

}  // namespace emgforge
