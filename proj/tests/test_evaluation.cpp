#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "emgforge/error.hpp"
#include "emgforge/evaluation.hpp"
#include "json.hpp"

using namespace emgforge;

namespace {

Series2D random_series(std::size_t fingers, std::size_t frames, std::uint64_t seed, float hi = 30.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, hi);
  Series2D s(fingers, std::vector<float>(frames));
  for (auto& row : s) {
    for (auto& v : row) v = u(rng) < hi * 0.5f ? 0.0f : u(rng);
  }
  return s;
}

}  // namespace

TEST_CASE("nrmse and r2 against brute-force formulas") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto truth = random_series(5, 200, seed);
    const auto pred = random_series(5, 200, seed + 100);
    double se = 0.0, sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t t = 0; t < 200; ++t) {
        se += std::pow(double(pred[i][t]) - truth[i][t], 2);
        sum += truth[i][t];
        ++n;
      }
    }
    const double mean = sum / n;
    double tot = 0.0;
    for (const auto& row : truth) {
      for (float v : row) tot += (v - mean) * (v - mean);
    }
    CHECK(nrmse(pred, truth, 30.0) == doctest::Approx(std::sqrt(se / n) / 30.0).epsilon(1e-12));
    CHECK(r_squared(pred, truth) == doctest::Approx(1.0 - se / tot).epsilon(1e-12));
  }
}

TEST_CASE("metric edge cases") {
  const auto truth = random_series(5, 50, 3);
  CHECK(nrmse(truth, truth, 30.0) == 0.0);
  CHECK(r_squared(truth, truth) == 1.0);
  Series2D flat(5, std::vector<float>(50, 2.0f));
  CHECK_THROWS_AS(r_squared(truth, flat), UndefinedVariance);
  Series2D short_pred(5, std::vector<float>(49));
  CHECK_THROWS_AS(nrmse(short_pred, truth, 30.0), ShapeError);
  CHECK_THROWS_AS(r_squared(Series2D(4, std::vector<float>(50)), truth), ShapeError);
}

TEST_CASE("frame accuracy needs all five fingers right") {
  Labels2D truth(5, std::vector<std::uint8_t>(4, 0));
  Labels2D pred = truth;
  truth[2][1] = 1;
  pred[2][1] = 1;
  pred[4][3] = 1;  // one wrong finger spoils frame 3
  CHECK(frame_accuracy(pred, truth) == doctest::Approx(0.75));
  CHECK(labels_from_force({{0.25f, 0.26f, 0.0f}})[0] == std::vector<std::uint8_t>{0, 1, 0});
}

TEST_CASE("tap events shorter than 0.1 s are discarded") {
  const double dt = 0.02;
  // 5 frames = exactly 0.1 s (kept), 4 frames = 0.08 s (dropped)
  Series2D p(1, std::vector<float>(30, 0.0f));
  for (std::size_t t = 2; t < 7; ++t) p[0][t] = 0.9f;
  for (std::size_t t = 12; t < 16; ++t) p[0][t] = 0.9f;
  const auto ev = extract_tap_events(p, 0.3, 0.1, dt);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].start_s == doctest::Approx(0.04));
  CHECK(ev[0].end_s == doctest::Approx(0.14));
  CHECK(ev[0].duration_s() == doctest::Approx(0.1));

  // at the 16 ms hop: 6 frames = 0.096 s dropped, 7 frames = 0.112 s kept
  Series2D q(1, std::vector<float>(40, 0.0f));
  for (std::size_t t = 0; t < 6; ++t) q[0][t] = 0.5f;
  for (std::size_t t = 20; t < 27; ++t) q[0][t] = 0.5f;
  const auto eq = extract_tap_events(q, 0.3, 0.1, 0.016, 1.0);
  REQUIRE(eq.size() == 1);
  CHECK(eq[0].start_s == doctest::Approx(1.32));

  // threshold is strict
  Series2D r(1, std::vector<float>(10, 0.25f));
  CHECK(extract_tap_events(r, 0.25, 0.0, 0.016).empty());
}

TEST_CASE("tap events run to the end of the series and are split per finger") {
  Series2D p(2, std::vector<float>(10, 0.0f));
  for (std::size_t t = 5; t < 10; ++t) p[1][t] = 1.0f;
  for (std::size_t t = 0; t < 3; ++t) p[0][t] = 1.0f;
  const auto ev = extract_tap_events(p, 0.5, 0.0, 0.1);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].finger == 0);
  CHECK(ev[1].finger == 1);
  CHECK(ev[1].end_s == doctest::Approx(1.0));
}

TEST_CASE("interval IoU") {
  CHECK(interval_iou({0, 0.0, 1.0}, {0, 0.5, 1.5}) == doctest::Approx(1.0 / 3.0));
  CHECK(interval_iou({0, 0.0, 1.0}, {0, 2.0, 3.0}) == 0.0);
  CHECK(interval_iou({0, 0.0, 1.0}, {0, 0.0, 1.0}) == 1.0);
}

TEST_CASE("matching requires IoU strictly above 0.5") {
  // IoU exactly 0.5: [0, 1) vs [0, 0.5)
  const std::vector<TapEvent> truth = {{0, 0.0, 1.0}};
  auto r = match_events({{0, 0.0, 0.5}}, truth);
  CHECK(r.fingers[0].tp == 0);
  CHECK(r.fingers[0].fp == 1);
  CHECK(r.fingers[0].fn == 1);
  r = match_events({{0, 0.0, 0.51}}, truth);
  CHECK(r.fingers[0].tp == 1);
  CHECK(r.fingers[0].fn == 0);
  // wrong finger never matches
  r = match_events({{1, 0.0, 1.0}}, truth);
  CHECK(r.fingers[1].fp == 1);
  CHECK(r.fingers[0].fn == 1);
}

TEST_CASE("matching is one-to-one") {
  const std::vector<TapEvent> truth = {{2, 1.0, 2.0}};
  const std::vector<TapEvent> pred = {{2, 1.0, 2.0}, {2, 1.05, 2.0}};
  const auto r = match_events(pred, truth);
  CHECK(r.fingers[2].tp == 1);
  CHECK(r.fingers[2].fp == 1);
  CHECK(r.fingers[2].precision() == doctest::Approx(0.5));
  CHECK(r.fingers[2].recall() == 1.0);
  // fingers with nothing predicted and nothing true count as perfect
  CHECK(r.fingers[0].precision() == 1.0);
  CHECK(r.fingers[0].recall() == 1.0);
  CHECK(r.mean_precision() == doctest::Approx((4.0 + 0.5) / 5.0));
  CHECK_THROWS_AS(match_events({{7, 0.0, 1.0}}, truth), InvalidArgument);
}

TEST_CASE("match results accumulate") {
  MatchResult a = match_events({{0, 0.0, 1.0}}, {{0, 0.0, 1.0}});
  a += match_events({{0, 3.0, 4.0}}, {});
  CHECK(a.fingers[0].tp == 1);
  CHECK(a.fingers[0].fp == 1);
  CHECK(events_csv({{1, 0.5, 0.75}}) == "finger,start_s,end_s\nindex,0.500000,0.750000\n");
}

TEST_CASE("metrics over predictions: smoothing, labels and false positives") {
  RecordingPrediction p;
  p.id = "S01_1_freeform";
  p.subject = "S01";
  p.action = "freeform";
  p.truth = Series2D(5, std::vector<float>(6, 0.0f));
  p.truth[0] = {0, 0, 10, 10, 0, 0};
  p.truth_labels = labels_from_force(p.truth);
  p.raw = Series2D(5, std::vector<float>(6, 0.0f));
  p.raw[0] = {0, 1, 10, 10, 0, 0};  // one false positive among 28 zero frames
  p.smoothed = p.raw;
  p.smoothed[0] = {0, 0, 10, 10, 0, 0};
  const auto m = compute_metrics({&p}, 30.0, true);
  CHECK(m.frames == 6);
  CHECK(m.accuracy == 1.0);
  CHECK(m.nrmse == 0.0);
  CHECK(m.nrmse_raw == doctest::Approx(std::sqrt(1.0 / 30.0) / 30.0));
  CHECK(m.zero_force_fp_rate == doctest::Approx(1.0 / 28.0));
  const auto raw_acc = compute_metrics({&p}, 30.0, false);
  CHECK(raw_acc.accuracy == doctest::Approx(5.0 / 6.0));

  const auto rep = report_from_predictions({p}, 30.0);
  CHECK(rep.per_subject.count("S01") == 1);
  CHECK(rep.finger_nrmse.size() == 5);
  CHECK(std::isnan(rep.finger_r2[1]));  // finger never loaded
  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["overall"]["accuracy"].get<double>() == 1.0);
  CHECK(j["per_finger"]["index"]["r2"].is_null());
  CHECK(rep.to_csv().rfind("group,key,accuracy,nrmse,r2,nrmse_raw,zero_force_fp_rate,frames\noverall,all,", 0) == 0);
}

TEST_CASE("deployed predictions use the last frame of each stride-1 window") {
  auto cfg = ForceNetConfig{};
  cfg.encoder_widths = {4, 8};
  cfg.decoder_widths = {8, 4};
  cfg.seq_len = 8;
  ForceNet model(cfg, 3);
  auto syn = synthetic_subject(2);
  syn.seed = 5;
  const auto rec = prepare_recording(synth_generate(syn, 2.0));
  EvalOptions opts;
  opts.smoothing = Smoothing::none;
  opts.batch = 7;
  const auto pred = predict_recording(model, rec, opts);
  const std::size_t n = rec.frames() - 7;
  CHECK(pred.first_frame == 7);
  CHECK(pred.times_s.size() == n);
  CHECK(pred.times_s[0] == rec.spec.frame_times_s[7]);
  for (std::size_t w : {std::size_t{0}, n / 2, n - 1}) {
    const auto out = forward_windows(model, rec, w, 1);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(pred.raw[i][w] == static_cast<float>(prob_to_force(out.data()[i * 8 + 7], 30.0)));
      CHECK(pred.truth[i][w] == rec.force[i][w + 7]);
    }
  }
  // batch size does not change the output
  opts.batch = 64;
  CHECK(predict_recording(model, rec, opts).raw == pred.raw);
}
