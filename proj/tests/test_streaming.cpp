#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

#include "doctest.h"
#include "emgforge/error.hpp"
#include "emgforge/evaluation.hpp"
#include "emgforge/streaming.hpp"
#include "emgforge/wire.hpp"

using namespace emgforge;

namespace {

ForceNet small_model(std::uint64_t seed) {
  ForceNetConfig cfg;
  cfg.encoder_widths = {4, 8};
  cfg.decoder_widths = {8, 4};
  cfg.seq_len = 8;
  ForceNet m(cfg, seed);
  const std::vector<double> mean(8, -4.0), sd(8, 3.0);
  m.set_input_stats(mean, sd);
  // shift the head so that some outputs land above 0.5
  for (auto& b : m.param("head.bias").value.vec()) b = 0.3f;
  return m;
}

Recording synth(std::uint64_t seed, double seconds) {
  auto cfg = synthetic_subject(seed);
  cfg.seed = seed;
  cfg.pulse_rate_hz = 0.5;
  return synth_generate(cfg, seconds);
}

}  // namespace

TEST_CASE("wire frame layout and round trip") {
  ForceFrameMsg m;
  m.timestamp_us = 0x0102030405060708ULL;
  m.forces = {1.5f, -0.0f, 30.0f, std::numeric_limits<float>::denorm_min(), 12.25f};
  m.flags = kFlagCalibrated;
  const auto w = encode_frame(m);
  CHECK(w.size() == 33);
  CHECK(std::memcmp(w.data(), "EF01", 4) == 0);
  CHECK(w[4] == 0x08);  // little-endian timestamp
  CHECK(w[11] == 0x01);
  float f0;
  std::memcpy(&f0, w.data() + 12, 4);
  CHECK(f0 == 1.5f);
  CHECK(w[32] == 1);
  const auto back = decode_frame(w);
  CHECK(back == m);
  CHECK(encode_frame(back) == w);
  CHECK(std::signbit(back.forces[1]));

  auto bad = w;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_frame(bad), FormatError);
  CHECK_THROWS_AS(decode_frame(std::span<const std::uint8_t>(w.data(), 32)), FormatError);
}

TEST_CASE("ring buffer keeps the newest samples") {
  CHECK_THROWS_AS(RingBuffer(1247, 8), InvalidArgument);
  RingBuffer ring(1248, 2);
  CHECK(ring.written() == 0);
  CHECK(ring.available() == 0);
  std::vector<std::vector<float>> block(2, std::vector<float>(1000));
  for (int s = 0; s < 1000; ++s) {
    block[0][s] = static_cast<float>(s);
    block[1][s] = static_cast<float>(-s);
  }
  ring.ingest(block);
  EmgBuffer out;
  CHECK(ring.read(1000, 3, out));
  CHECK(out.samples[0] == std::vector<float>{997, 998, 999});
  CHECK(out.samples[1] == std::vector<float>{-997, -998, -999});
  for (auto& ch : block) {
    for (auto& v : ch) v += (v >= 0.0f ? 1000.0f : -1000.0f);
  }
  ring.ingest(block);  // 2000 written: samples below 752 are gone
  CHECK(ring.written() == 2000);
  CHECK(ring.available() == 1248);
  CHECK(ring.read(2000, 1248, out));
  CHECK(out.samples[0].front() == 752.0f);
  CHECK(out.samples[0].back() == 1999.0f);
  CHECK_FALSE(ring.read(2000, 1249, out));
  CHECK_FALSE(ring.read(2001, 1, out));
  CHECK_FALSE(ring.read(1000, 300, out));  // sample 700 overwritten
  CHECK_THROWS_AS(ring.ingest(std::vector<std::vector<float>>(3, std::vector<float>(1))), ShapeError);
}

TEST_CASE("ring buffer under a concurrent producer") {
  RingBuffer ring(4096, 1);
  const std::size_t total = 200000;
  std::thread producer([&] {
    std::vector<std::vector<float>> block(1, std::vector<float>(32));
    for (std::size_t s0 = 0; s0 < total; s0 += 32) {
      for (std::size_t k = 0; k < 32; ++k) block[0][k] = static_cast<float>(s0 + k);
      ring.ingest(block);
      if ((s0 / 32) % 8 == 0) std::this_thread::sleep_for(std::chrono::microseconds(50));
    }
  });
  EmgBuffer out;
  std::size_t checked = 0;
  while (ring.written() < total) {
    const auto end = ring.written();
    if (end < 256) continue;
    if (ring.read(end, 256, out)) {
      for (std::size_t k = 0; k < 256; ++k) REQUIRE(out.samples[0][k] == static_cast<float>(end - 256 + k));
      ++checked;
    }
  }
  producer.join();
  CHECK(checked > 0);
}

TEST_CASE("latency percentiles") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const auto s = latency_stats(v);
  CHECK(s.p50_ms == 50.0);
  CHECK(s.p99_ms == 99.0);
  CHECK(s.max_ms == 100.0);
  CHECK(s.mean_ms == doctest::Approx(50.5));
  CHECK(latency_stats({}).p99_ms == 0.0);
}

TEST_CASE("decoder waits for a full window and a new hop") {
  StreamDecoder dec(small_model(1));
  CHECK(dec.window_samples() == 256 + 7 * 32);
  RingBuffer ring;
  std::vector<std::vector<float>> block(8, std::vector<float>(479, 0.01f));
  ring.ingest(block);
  CHECK_FALSE(dec.poll_infer(ring).has_value());
  ring.ingest(std::vector<std::vector<float>>(8, std::vector<float>(1, 0.02f)));
  const auto first = dec.poll_infer(ring);
  REQUIRE(first.has_value());
  CHECK(first->timestamp_us == 240000);  // 480 samples at 2 kHz
  CHECK_FALSE(dec.poll_infer(ring).has_value());
  // three hops arrive at once: only the newest is decoded, two are dropped
  ring.ingest(std::vector<std::vector<float>>(8, std::vector<float>(96, 0.0f)));
  const auto next = dec.poll_infer(ring);
  REQUIRE(next.has_value());
  CHECK(next->timestamp_us == 288000);
  const auto rep = dec.report();
  CHECK(rep.processed == 2);
  CHECK(rep.dropped == 2);
  CHECK(rep.offered == 4);
  CHECK(rep.hop_wait_ms == doctest::Approx(16.0));
}

TEST_CASE("speed-0 replay matches offline causal predictions") {
  const auto rec = synth(3, 12.0);
  ForceNet model = small_model(2);
  StreamDecoder dec(model);
  const auto res = replay(rec.emg, dec);
  REQUIRE(res.frames.size() == expected_emissions(rec.emg.length(), dec.window_samples(), 32));
  CHECK(res.report.dropped == 0);

  EvalOptions opts;
  opts.smoothing = Smoothing::causal;
  const auto pred = predict_recording(model, prepare_recording(rec), opts);
  REQUIRE(pred.smoothed[0].size() == res.frames.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < res.frames.size(); ++k) {
    CHECK(res.frames[k].timestamp_us == 240000 + 16000 * k);
    for (std::size_t i = 0; i < 5; ++i) {
      worst = std::max(worst, std::abs(double(res.frames[k].forces[i]) - pred.smoothed[i][k]));
    }
  }
  CHECK(worst <= 1e-5);

  // odd block sizes and a small ring give the same frames
  StreamDecoder dec2(model);
  ReplayOptions odd;
  odd.block = 7;
  odd.ring_capacity = 1248;
  const auto res2 = replay(rec.emg, dec2, odd);
  REQUIRE(res2.frames.size() == res.frames.size());
  CHECK(res2.frames == res.frames);
}

TEST_CASE("paced replay emits every hop") {
  const auto rec = synth(4, 2.0);
  StreamDecoder dec(small_model(3));
  ReplayOptions opts;
  opts.speed = 4.0;
  const auto res = replay(rec.emg, dec, opts);
  CHECK(res.wall_s >= 0.45);
  CHECK(res.report.offered == expected_emissions(rec.emg.length(), dec.window_samples(), 32));
  CHECK(res.report.decode.p50_ms >= 0.0);
}

TEST_CASE("calibrated models set the wire flag") {
  ForceNet m = small_model(4);
  m.mutable_config().calibrated = true;
  StreamDecoder dec(m);
  const auto res = replay(synth(5, 2.0).emg, dec);
  REQUIRE_FALSE(res.frames.empty());
  CHECK(res.frames[0].flags == kFlagCalibrated);
}

TEST_CASE("frames csv") {
  ForceFrameMsg m;
  m.timestamp_us = 1234567;
  m.forces = {1, 2, 3, 4, 0.5f};
  CHECK(frames_csv({m}) == "t_s,thumb,index,middle,ring,pinky\n1.234567,1,2,3,4,0.5\n");
}

TEST_CASE("endpoint parsing") {
  const auto [host, port] = parse_endpoint("127.0.0.1:7450");
  CHECK(host == "127.0.0.1");
  CHECK(port == 7450);
  CHECK_THROWS_AS(parse_endpoint("localhost"), InvalidArgument);
  CHECK_THROWS_AS(parse_endpoint("host:99999"), InvalidArgument);
}

TEST_CASE("broadcaster delivers every frame to two subscribers") {
  Broadcaster hub("127.0.0.1:0");
  REQUIRE(hub.port() != 0);
  const std::string ep = "127.0.0.1:" + std::to_string(hub.port());
  std::vector<ForceFrameMsg> got_a, got_b;
  std::thread a([&] { got_a = receive_frames(ep, 50); });
  std::thread b([&] { got_b = receive_frames(ep, 50); });
  for (int i = 0; i < 200 && hub.clients() < 2; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  REQUIRE(hub.clients() == 2);
  std::vector<ForceFrameMsg> sent;
  for (std::uint64_t k = 0; k < 50; ++k) {
    ForceFrameMsg m;
    m.timestamp_us = 16000 * k;
    m.forces = {float(k), 0, 0, 0, 1};
    sent.push_back(m);
    hub.publish(m);
  }
  a.join();
  b.join();
  CHECK(got_a == sent);
  CHECK(got_b == sent);
  CHECK_THROWS_AS(Broadcaster{ep}, IoError);  // port already taken
  hub.stop();
}
