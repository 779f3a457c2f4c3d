#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "doctest.h"
#include "emgforge/dataset.hpp"
#include "emgforge/error.hpp"
#include "emgforge/forcenet.hpp"

using namespace emgforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("emgforge_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Recording small_recording(std::uint64_t seed, double seconds = 4.0, std::string action = std::string(kFreeform)) {
  auto cfg = synthetic_session(synthetic_subject(seed), seed + 1);
  cfg.seed = seed + 2;
  cfg.action = std::move(action);
  cfg.pulse_rate_hz = 0.5;
  return synth_generate(cfg, seconds);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void overwrite(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << text;
}

}  // namespace

TEST_CASE("synthetic recordings are deterministic and valid") {
  const auto a = small_recording(3), b = small_recording(3), c = small_recording(4);
  CHECK(a.emg.samples == b.emg.samples);
  CHECK(a.force.values == b.force.values);
  CHECK(a.emg.samples != c.emg.samples);
  CHECK_NOTHROW(a.validate());
  CHECK(a.emg.channels() == 8);
  CHECK(a.emg.length() == 8000);
  CHECK(a.force.length() == 500);
  CHECK(a.force.times_s[1] == doctest::Approx(0.008));
  for (std::size_t i = 0; i < kFingers; ++i) {
    for (float v : a.force.values[i]) {
      CHECK(v >= 0.0f);
      CHECK(v <= kDefaultForceCaps[i] + 1e-4);
    }
  }
}

TEST_CASE("single-finger actions only load that finger") {
  const auto rec = small_recording(5, 20.0, "press_index");
  for (std::size_t i = 0; i < kFingers; ++i) {
    const float peak = *std::max_element(rec.force.values[i].begin(), rec.force.values[i].end());
    if (i == 1) CHECK(peak > 1.0f);
    else CHECK(peak == 0.0f);
  }
  CHECK(action_fingers("pinch_all").size() == 5);
  CHECK(action_fingers("press_four") == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK_THROWS_AS(action_fingers("wave"), ConfigError);
}

TEST_CASE("synthetic EMG energy tracks force") {
  auto cfg = synthetic_subject(9);
  cfg.seed = 1;
  cfg.action = "press_middle";
  cfg.pulse_rate_hz = 0.4;
  const auto rec = synth_generate(cfg, 30.0);
  // channel with the largest middle-finger gain
  std::size_t best = 0;
  for (std::size_t c = 1; c < kEmgChannels; ++c) {
    if (cfg.mixing[c][2] > cfg.mixing[best][2]) best = c;
  }
  double rest = 0.0, active = 0.0;
  std::size_t n_rest = 0, n_active = 0;
  for (std::size_t k = 0; k < rec.force.length(); ++k) {
    const std::size_t s = k * 16;  // 2000 / 125
    double e = 0.0;
    for (std::size_t j = s; j < s + 16 && j < rec.emg.length(); ++j) e += rec.emg.samples[best][j] * rec.emg.samples[best][j];
    if (rec.force.values[2][k] == 0.0f) {
      rest += e;
      ++n_rest;
    } else if (rec.force.values[2][k] > 5.0f) {
      active += e;
      ++n_active;
    }
  }
  REQUIRE(n_rest > 0);
  REQUIRE(n_active > 0);
  CHECK(active / n_active > 100.0 * rest / n_rest);
}

TEST_CASE("synthetic config validation") {
  auto cfg = synthetic_subject(1);
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  for (auto& row : bad.mixing) row[3] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.caps[0] = 31.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.carrier_hz[0][0] = 440.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.action = "jump";
  CHECK_THROWS_AS(synth_generate(bad, 1.0), ConfigError);
}

TEST_CASE("subjects differ, sessions drift slightly") {
  const auto s1 = synthetic_subject(1), s2 = synthetic_subject(2);
  const auto d = synthetic_session(s1, 77);
  double subj = 0.0, sess = 0.0;
  for (std::size_t c = 0; c < kEmgChannels; ++c) {
    for (std::size_t i = 0; i < kFingers; ++i) {
      subj += std::abs(std::log(s2.mixing[c][i] / s1.mixing[c][i]));
      sess += std::abs(std::log(d.mixing[c][i] / s1.mixing[c][i]));
    }
  }
  CHECK(sess > 0.0);
  CHECK(sess < subj);
}

TEST_CASE("ridge regression on envelopes recovers force on unseen time") {
  // independent oracle: window RMS per channel -> mean force per finger,
  // fitted on the first 20 s and scored on the last 10 s
  const auto rec = small_recording(21, 30.0);
  const std::size_t win = 500;  // 0.25 s
  const std::size_t n = rec.emg.length() / win;
  Eigen::MatrixXd x(n, kEmgChannels + 1), y(n, kFingers);
  for (std::size_t w = 0; w < n; ++w) {
    for (std::size_t c = 0; c < kEmgChannels; ++c) {
      double ss = 0.0;
      for (std::size_t k = w * win; k < (w + 1) * win; ++k) ss += double(rec.emg.samples[c][k]) * rec.emg.samples[c][k];
      x(w, c) = std::sqrt(ss / win);
    }
    x(w, kEmgChannels) = 1.0;
    const double t0 = double(w * win) / rec.emg.rate_hz, t1 = double((w + 1) * win) / rec.emg.rate_hz;
    for (std::size_t i = 0; i < kFingers; ++i) {
      double sum = 0.0;
      int cnt = 0;
      for (std::size_t k = 0; k < rec.force.length(); ++k) {
        if (rec.force.times_s[k] >= t0 && rec.force.times_s[k] < t1) {
          sum += rec.force.values[i][k];
          ++cnt;
        }
      }
      y(w, i) = cnt ? sum / cnt : 0.0;
    }
  }
  const Eigen::Index fit = static_cast<Eigen::Index>(n * 2 / 3);
  const Eigen::MatrixXd xf = x.topRows(fit), yf = y.topRows(fit);
  Eigen::MatrixXd gram = xf.transpose() * xf;
  gram.diagonal().array() += 1e-3 * gram.diagonal().mean();
  const Eigen::MatrixXd beta = gram.ldlt().solve(xf.transpose() * yf);
  const Eigen::MatrixXd xt = x.bottomRows(n - fit), yt = y.bottomRows(n - fit);
  const Eigen::MatrixXd resid = yt - xt * beta;
  double r2 = 0.0;
  for (std::size_t i = 0; i < kFingers; ++i) {
    const auto col = yt.col(i);
    const double ss_tot = (col.array() - col.mean()).square().sum();
    r2 += 1.0 - resid.col(i).squaredNorm() / ss_tot;
  }
  r2 /= kFingers;
  MESSAGE("ridge held-out R2 " << r2);
  CHECK(r2 > 0.3);
}

TEST_CASE("recording directory round trip is lossless") {
  TempDir tmp("rec_roundtrip");
  auto rec = small_recording(11);
  rec.hand = Hand::left;
  save_recording(rec, tmp.path / "r");
  const auto back = load_recording(tmp.path / "r");
  CHECK(back.subject == rec.subject);
  CHECK(back.session == rec.session);
  CHECK(back.action == rec.action);
  CHECK(back.hand == Hand::left);
  CHECK(back.emg.rate_hz == rec.emg.rate_hz);
  CHECK(back.emg.samples == rec.emg.samples);
  CHECK(back.force.values == rec.force.values);
  CHECK(back.force.times_s == rec.force.times_s);

  // emg.bin is sample-interleaved little-endian f32
  const auto bin = slurp(tmp.path / "r" / "emg.bin");
  REQUIRE(bin.size() == rec.emg.length() * 8 * 4);
  float first[2];
  std::memcpy(first, bin.data(), 8);
  CHECK(first[0] == rec.emg.samples[0][0]);
  CHECK(first[1] == rec.emg.samples[1][0]);
}

TEST_CASE("recording hash is stable and content-sensitive") {
  TempDir tmp("rec_hash");
  const auto rec = small_recording(12);
  save_recording(rec, tmp.path / "a");
  save_recording(rec, tmp.path / "b");
  const auto h = recording_hash(tmp.path / "a");
  CHECK(h.size() == 16);
  CHECK(h == recording_hash(tmp.path / "b"));
  auto text = slurp(tmp.path / "b" / "force.csv");
  text[text.size() - 2] = text[text.size() - 2] == '1' ? '2' : '1';
  overwrite(tmp.path / "b" / "force.csv", text);
  CHECK(h != recording_hash(tmp.path / "b"));
}

TEST_CASE("manifest round trip and dataset loading") {
  TempDir tmp("manifest");
  std::vector<ManifestEntry> entries;
  for (std::uint64_t s = 0; s < 2; ++s) {
    auto rec = small_recording(20 + s, 2.0);
    rec.subject = "S0" + std::to_string(s + 1);
    const std::string rel = rec.subject + "/1_freeform";
    save_recording(rec, tmp.path / rel);
    entries.push_back({rec.id(), rel, rec.subject, rec.session, rec.action, rec.duration_s(),
                       recording_hash(tmp.path / rel)});
  }
  write_manifest(tmp.path, entries);
  const auto back = read_manifest(tmp.path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].path == entries[1].path);
  CHECK(back[1].hash == entries[1].hash);
  CHECK(back[0].duration_s == entries[0].duration_s);
  const auto data = load_dataset(tmp.path);
  CHECK(data.size() == 2);
  CHECK(data[1].subject == "S02");
}

TEST_CASE("malformed recordings name the offending field") {
  TempDir tmp("malformed");
  const auto rec = small_recording(13, 2.0);
  save_recording(rec, tmp.path / "r");
  const auto meta = slurp(tmp.path / "r" / "meta.json");

  overwrite(tmp.path / "r" / "meta.json", "{\"subject\": \"S01\"}");
  try {
    load_recording(tmp.path / "r");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("'session'") != std::string::npos);
  }
  overwrite(tmp.path / "r" / "meta.json", meta);

  auto bin = slurp(tmp.path / "r" / "emg.bin");
  overwrite(tmp.path / "r" / "emg.bin", bin.substr(0, bin.size() - 4));
  CHECK_THROWS_AS(load_recording(tmp.path / "r"), FormatError);
  overwrite(tmp.path / "r" / "emg.bin", bin);

  auto csv = slurp(tmp.path / "r" / "force.csv");
  overwrite(tmp.path / "r" / "force.csv", "time,a,b\n" + csv.substr(csv.find('\n') + 1));
  CHECK_THROWS_AS(load_recording(tmp.path / "r"), FormatError);
  CHECK_THROWS_AS(load_recording(tmp.path / "missing"), IoError);
}

TEST_CASE("recording invariants") {
  auto rec = small_recording(14, 2.0);
  rec.force.values[0][3] = 36.0f;
  CHECK_THROWS_AS(rec.validate(), DataError);
  rec = small_recording(14, 2.0);
  for (auto& t : rec.force.times_s) t += 100.0;
  CHECK_THROWS_AS(rec.validate(), DataError);
  rec = small_recording(14, 2.0);
  for (auto& t : rec.force.times_s) t *= 2.0;  // 62.5 Hz
  CHECK_THROWS_AS(rec.validate(), DataError);
}

TEST_CASE("prepared recordings align force to frame centres") {
  const auto rec = small_recording(15, 3.0);
  const auto prep = prepare_recording(rec);
  CHECK(prep.frames() == frame_count(rec.emg.length(), WindowSpec{}));
  CHECK(prep.spec.bins == 64);
  CHECK(prep.force.size() == 5);
  for (std::size_t f = 0; f < prep.frames(); ++f) {
    const double t = prep.spec.frame_times_s[f];
    // nearest pad sample by brute force
    std::size_t best = 0;
    for (std::size_t k = 1; k < rec.force.length(); ++k) {
      if (std::abs(rec.force.times_s[k] - t) < std::abs(rec.force.times_s[best] - t)) best = k;
    }
    for (std::size_t i = 0; i < kFingers; ++i) {
      CHECK(prep.force[i][f] == rec.force.values[i][best]);
      CHECK(prep.labels[i][f] == force_label(prep.force[i][f]));
    }
  }
}

TEST_CASE("input statistics and windows") {
  const auto a = prepare_recording(small_recording(16, 3.0));
  const auto b = prepare_recording(small_recording(17, 2.0));
  const auto stats = compute_input_stats({&a, &b});
  for (std::size_t c = 0; c < 8; ++c) {
    double s = 0.0, s2 = 0.0, n = 0.0;
    for (const auto* r : {&a, &b}) {
      for (std::size_t f = 0; f < r->frames(); ++f) {
        for (std::size_t k = 0; k < 64; ++k) {
          const double v = r->spec.at(c, f, k);
          s += v;
          s2 += v * v;
          n += 1.0;
        }
      }
    }
    const double mean = s / n;
    CHECK(stats.mean[c] == doctest::Approx(mean).epsilon(1e-9));
    CHECK(stats.std[c] == doctest::Approx(std::sqrt(s2 / n - mean * mean)).epsilon(1e-6));
  }

  CHECK(window_count(100, 32, 4) == 18);
  CHECK(window_count(31, 32, 4) == 0);
  const auto windows = make_windows(a, 32, 4, stats);
  CHECK(windows.size() == window_count(a.frames(), 32, 4));
  const auto& w = windows[2];
  CHECK(w.start_frame == 8);
  CHECK(w.input.size() == 8 * 32 * 64);
  CHECK(w.input[(3 * 32 + 5) * 64 + 7] ==
        doctest::Approx((a.spec.at(3, 13, 7) - stats.mean[3]) / stats.std[3]).epsilon(1e-5));
  CHECK(w.force[4][0] == a.force[4][8]);
  auto tiny = small_recording(18, 2.0);  // cut to 0.5 s: 28 frames
  for (auto& ch : tiny.emg.samples) ch.resize(1000);
  for (auto& f : tiny.force.values) f.resize(62);
  tiny.force.times_s.resize(62);
  CHECK_THROWS_AS(make_windows(tiny, PrepareOptions{}, 32, 4, stats), InsufficientData);
}

TEST_CASE("session split holds out exactly one session per subject") {
  std::vector<Recording> recs;
  for (std::string s : {"S01", "S02", "S03"}) {
    for (std::string k : {"1", "2", "3"}) {
      Recording r;
      r.subject = s;
      r.session = k;
      recs.push_back(r);
    }
  }
  const auto a = split_sessions(recs, 5), b = split_sessions(recs, 5);
  CHECK(a.eval == b.eval);
  CHECK(a.eval.size() == 3);
  CHECK(a.train.size() == 6);
  std::set<std::string> subjects;
  for (auto i : a.eval) subjects.insert(recs[i].subject);
  CHECK(subjects.size() == 3);
  std::set<std::vector<std::size_t>> distinct;
  for (std::uint64_t seed = 0; seed < 20; ++seed) distinct.insert(split_sessions(recs, seed).eval);
  CHECK(distinct.size() > 1);
  recs.pop_back();
  recs.pop_back();
  CHECK_THROWS_AS(split_sessions(recs, 1), ConfigError);
}
