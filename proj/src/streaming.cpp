// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "emgforge/error.hpp"
#include "emgforge/evaluation.hpp"
#include "json.hpp"

namespace emgforge {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now().time_since_epoch()).count();
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

RingBuffer::RingBuffer(std::size_t capacity, std::size_t channels)
    : capacity_(capacity), channels_(channels), data_(channels, std::vector<float>(capacity)) {
  if (channels == 0) throw InvalidArgument("ring buffer: channels must be >= 1");
  if (capacity < 1248) throw InvalidArgument("ring buffer: capacity must hold one 1248-sample window");
}

std::uint64_t RingBuffer::ingest(std::span<const std::span<const float>> block) {
  if (block.size() != channels_) {
    throw ShapeError("ring buffer: block has " + std::to_string(block.size()) + " channels, expected " +
                     std::to_string(channels_));
  }
  const std::size_t n = block.front().size();
  for (const auto& ch : block) {
    if (ch.size() != n) throw ShapeError("ring buffer: ragged block");
  }
  if (n == 0) throw InvalidArgument("ring buffer: empty block");
  const std::uint64_t w = written_.load(std::memory_order_relaxed);
  // announce the slots about to be overwritten before touching them
  reserved_.store(w + n, std::memory_order_relaxed);
  std::atomic_thread_fence(std::memory_order_release);
  for (std::size_t c = 0; c < channels_; ++c) {
    for (std::size_t s = 0; s < n; ++s) data_[c][(w + s) % capacity_] = block[c][s];
  }
  written_.store(w + n, std::memory_order_release);
  last_ingest_ns_.store(now_ns(), std::memory_order_release);
  return w + n;
}

std::uint64_t RingBuffer::ingest(const std::vector<std::vector<float>>& block) {
  std::vector<std::span<const float>> spans(block.begin(), block.end());
  return ingest(std::span<const std::span<const float>>(spans));
}

std::size_t RingBuffer::available() const {
  return static_cast<std::size_t>(std::min<std::uint64_t>(written(), capacity_));
}

bool RingBuffer::read(std::uint64_t end, std::size_t n, EmgBuffer& out) const {
  if (n > capacity_ || end < n || end > written()) return false;
  const std::uint64_t begin = end - n;
  out.samples.resize(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    out.samples[c].resize(n);
    for (std::size_t s = 0; s < n; ++s) out.samples[c][s] = data_[c][(begin + s) % capacity_];
  }
  // the producer may have lapped us while copying
  std::atomic_thread_fence(std::memory_order_acquire);
  return reserved_.load(std::memory_order_relaxed) - begin <= capacity_;
}

LatencyStats latency_stats(std::vector<double> v) {
  LatencyStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto pct = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
    return v[std::min(idx, v.size() - 1)];
  };
  s.mean_ms = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.p50_ms = pct(0.50);
  s.p99_ms = pct(0.99);
  s.max_ms = v.back();
  return s;
}

std::string LatencyReport::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "windows: offered %zu, processed %zu, dropped %zu\n"
                "hop wait: %.3f ms\n"
                "inference per hop: mean %.3f ms, p50 %.3f ms, p99 %.3f ms, max %.3f ms\n"
                "decode latency (newest-sample age): mean %.3f ms, p50 %.3f ms, p99 %.3f ms\n"
                "reaction latency (hop wait + p50 decode): %.3f ms\n",
                offered, processed, dropped, hop_wait_ms, inference.mean_ms, inference.p50_ms, inference.p99_ms,
                inference.max_ms, decode.mean_ms, decode.p50_ms, decode.p99_ms, reaction_ms());
  return buf;
}

std::string LatencyReport::to_json() const {
  auto stats = [](const LatencyStats& s) {
    return nlohmann::ordered_json{{"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p99_ms", s.p99_ms},
                                  {"max_ms", s.max_ms}};
  };
  nlohmann::ordered_json j;
  j["offered"] = offered;
  j["processed"] = processed;
  j["dropped"] = dropped;
  j["hop_wait_ms"] = hop_wait_ms;
  j["inference"] = stats(inference);
  j["decode"] = stats(decode);
  j["reaction_ms"] = reaction_ms();
  return j.dump(2);
}

StreamDecoder::StreamDecoder(ForceNet model, StreamConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  config_.prep.window.validate();
  if (config_.smooth_window < 1) throw InvalidArgument("stream: smooth window must be >= 1");
  const auto& w = config_.prep.window;
  window_samples_ = w.window_len + (model_.config().seq_len - 1) * w.hop;
  causal_weights_ = causal_gaussian_weights(config_.smooth_window);
}

void StreamDecoder::reset() {
  last_end_.reset();
  history_.clear();
  inference_ms_.clear();
  decode_ms_.clear();
  dropped_ = 0;
}

std::optional<ForceFrameMsg> StreamDecoder::poll_infer(const RingBuffer& buf) {
  const std::uint64_t total = buf.written();
  const std::size_t hop = config_.prep.window.hop;
  if (total < window_samples_) return std::nullopt;
  // newest window whose end sits on the hop grid of the stream
  const std::uint64_t end = window_samples_ + (total - window_samples_) / hop * hop;
  if (last_end_ && end <= *last_end_) return std::nullopt;
  const std::uint64_t skipped = last_end_ ? (end - *last_end_) / hop - 1 : (end - window_samples_) / hop;
  const std::int64_t arrival_ns = buf.last_ingest_ns();

  const auto t0 = Clock::now();
  if (!buf.read(end, window_samples_, scratch_)) {
    // overwritten during the copy: count as dropped and wait for the next hop
    dropped_ += skipped + 1;
    last_end_ = end;
    return std::nullopt;
  }
  scratch_.rate_hz = kEmgRateHz;
  const Spectrogram sg = prepare_emg(scratch_, config_.prep, static_cast<std::size_t>(end - window_samples_));
  const auto& cfg = model_.config();
  if (sg.frames != cfg.seq_len || sg.bins != cfg.bins) throw ShapeError("stream: window does not match model input");
  nn::Tensor<float> x({1, cfg.in_channels, cfg.seq_len, cfg.bins}, sg.mag);
  model_.normalize_inplace(x.span());
  const auto out = model_.forward(x, Mode::eval);
  std::array<float, kFingers> raw{};
  for (std::size_t i = 0; i < kFingers; ++i) {
    const double v = out.data()[i * cfg.seq_len + (cfg.seq_len - 1)];
    raw[i] = static_cast<float>(head_to_output(cfg, v, config_.cutoff_n));
  }
  history_.push_front(raw);
  if (history_.size() > config_.smooth_window) history_.pop_back();
  ForceFrameMsg msg;
  for (std::size_t i = 0; i < kFingers; ++i) {
    double acc = 0.0, norm = 0.0;
    for (std::size_t lag = 0; lag < history_.size(); ++lag) {
      acc += causal_weights_[lag] * history_[lag][i];
      norm += causal_weights_[lag];
    }
    msg.forces[i] = static_cast<float>(acc / norm);
  }
  inference_ms_.push_back(ms_since(t0));
  decode_ms_.push_back(static_cast<double>(now_ns() - arrival_ns) / 1e6);
  msg.timestamp_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(end) * 1e6 / kEmgRateHz));
  msg.flags = cfg.calibrated ? kFlagCalibrated : 0;
  dropped_ += skipped;
  last_end_ = end;
  return msg;
}

LatencyReport StreamDecoder::report() const {
  LatencyReport r;
  r.inference = latency_stats(inference_ms_);
  r.decode = latency_stats(decode_ms_);
  r.hop_wait_ms = 1000.0 * static_cast<double>(config_.prep.window.hop) / kEmgRateHz;
  r.processed = inference_ms_.size();
  r.dropped = dropped_;
  r.offered = r.processed + r.dropped;
  return r;
}

std::size_t expected_emissions(std::size_t samples, std::size_t window_samples, std::size_t hop) {
  if (samples < window_samples) return 0;
  return (samples - window_samples) / hop + 1;
}

ReplayResult replay(const EmgBuffer& emg, StreamDecoder& decoder, const ReplayOptions& opts, const FrameSink& sink) {
  emg.validate();
  if (opts.block == 0) throw InvalidArgument("replay: block must be >= 1");
  if (opts.speed < 0.0) throw InvalidArgument("replay: speed must be >= 0");
  RingBuffer ring(opts.ring_capacity, emg.channels());
  ReplayResult result;
  const std::size_t n = emg.length();
  auto block_at = [&](std::size_t s0) {
    const std::size_t len = std::min(opts.block, n - s0);
    std::vector<std::span<const float>> spans;
    for (const auto& ch : emg.samples) spans.emplace_back(ch.data() + s0, len);
    return spans;
  };
  auto emit = [&](const ForceFrameMsg& m) {
    result.frames.push_back(m);
    if (sink) sink(m);
  };

  const auto t0 = Clock::now();
  if (opts.speed == 0.0) {
    for (std::size_t s0 = 0; s0 < n; s0 += opts.block) {
      const auto spans = block_at(s0);
      ring.ingest(spans);
      while (auto m = decoder.poll_infer(ring)) emit(*m);
    }
  } else {
    std::atomic<bool> done{false};
    std::thread producer([&] {
      const double sample_s = 1.0 / (emg.rate_hz * opts.speed);
      for (std::size_t s0 = 0; s0 < n; s0 += opts.block) {
        const std::size_t len = std::min(opts.block, n - s0);
        // a block is released once its last sample has "arrived"
        std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(
                                               std::chrono::duration<double>(static_cast<double>(s0 + len) * sample_s)));
        const auto spans = block_at(s0);
        ring.ingest(spans);
      }
      done.store(true, std::memory_order_release);
    });
    for (;;) {
      const bool finished = done.load(std::memory_order_acquire);
      bool any = false;
      while (auto m = decoder.poll_infer(ring)) {
        emit(*m);
        any = true;
      }
      if (finished) break;
      if (!any) std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    producer.join();
  }
  result.wall_s = std::chrono::duration<double>(Clock::now() - t0).count();
  result.report = decoder.report();
  return result;
}

std::string frames_csv(const std::vector<ForceFrameMsg>& frames) {
  std::string out = "t_s";
  for (auto name : kFingerNames) out += "," + std::string(name);
  out += "\n";
  char buf[64];
  for (const auto& f : frames) {
    std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(f.timestamp_us) / 1e6);
    out += buf;
    for (float v : f.forces) {
      std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(v));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace emgforge
