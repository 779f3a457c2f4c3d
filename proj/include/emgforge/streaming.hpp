// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Real-time decoding: a single-producer/single-consumer EMG ring buffer, the
// hop-gated decoder, latency accounting, recording replay and the TCP
// force-frame broadcaster.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "emgforge/dataset.hpp"
#include "emgforge/forcenet.hpp"
#include "emgforge/wire.hpp"

namespace emgforge {

/// Fixed-capacity multichannel sample ring. One producer calls ingest(), one
/// consumer reads; the write cursor is published with release semantics.
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = 4096, std::size_t channels = kEmgChannels);

  /// Appends a [channel][time] block, overwriting the oldest samples beyond
  /// capacity. Throws ShapeError on a channel-count mismatch.
  std::uint64_t ingest(const std::vector<std::vector<float>>& block);
  /// Same, for channels given as spans of equal length.
  std::uint64_t ingest(std::span<const std::span<const float>> block);

  std::size_t capacity() const { return capacity_; }
  std::size_t channels() const { return channels_; }
  /// Total samples ever written (the write cursor).
  std::uint64_t written() const { return written_.load(std::memory_order_acquire); }
  std::size_t available() const;
  /// Steady-clock time (ns) of the most recent ingest.
  std::int64_t last_ingest_ns() const { return last_ingest_ns_.load(std::memory_order_acquire); }

  /// Copies samples [end - n, end) into `out`. Returns false when they have
  /// been overwritten (or were never written).
  bool read(std::uint64_t end, std::size_t n, EmgBuffer& out) const;

 private:
  std::size_t capacity_;
  std::size_t channels_;
  std::vector<std::vector<float>> data_;
  std::atomic<std::uint64_t> written_{0};
  std::atomic<std::uint64_t> reserved_{0};  // end of the block being written
  std::atomic<std::int64_t> last_ingest_ns_{0};
};

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

LatencyStats latency_stats(std::vector<double> samples_ms);

struct LatencyReport {
  LatencyStats inference;       // window build + forward + smoothing, per hop
  LatencyStats decode;          // newest-sample age at emission
  double hop_wait_ms = 0.0;     // time to accumulate one hop of new samples
  std::size_t processed = 0;
  std::size_t dropped = 0;
  std::size_t offered = 0;

  /// Hop wait plus median decode latency.
  double reaction_ms() const { return hop_wait_ms + decode.p50_ms; }
  std::string to_text() const;
  std::string to_json() const;
};

struct StreamConfig {
  std::size_t smooth_window = 10;  // causal Gaussian over emitted frames; 1 disables
  double cutoff_n = kDefaultCutoffN;
  PrepareOptions prep;
};

/// Hop-gated decoder: once a full window is buffered and a hop of new samples
/// has arrived, decodes the newest hop-aligned window and emits the forces of
/// its last frame, smoothed causally over the previous emissions.
class StreamDecoder {
 public:
  StreamDecoder(ForceNet model, StreamConfig config = {});

  std::optional<ForceFrameMsg> poll_infer(const RingBuffer& buf);

  std::size_t window_samples() const { return window_samples_; }
  std::size_t hop() const { return config_.prep.window.hop; }
  const ForceNet& model() const { return model_; }
  LatencyReport report() const;
  void reset();

 private:
  ForceNet model_;
  StreamConfig config_;
  std::size_t window_samples_;
  std::optional<std::uint64_t> last_end_;
  std::deque<std::array<float, kFingers>> history_;  // newest first
  std::vector<double> causal_weights_;
  std::vector<double> inference_ms_;
  std::vector<double> decode_ms_;
  std::size_t dropped_ = 0;
  EmgBuffer scratch_;
};

struct ReplayOptions {
  double speed = 0.0;  // 0 = as fast as possible; 1 = real time
  std::size_t block = 32;
  std::size_t ring_capacity = 4096;
};

struct ReplayResult {
  std::vector<ForceFrameMsg> frames;
  LatencyReport report;
  double wall_s = 0.0;
};

using FrameSink = std::function<void(const ForceFrameMsg&)>;

/// Pushes the recording's EMG through a ring buffer into `decoder` in blocks
/// paced to 2000 * speed Hz. At speed 0 ingest and decode alternate on one
/// thread; otherwise a producer thread paces the samples.
ReplayResult replay(const EmgBuffer& emg, StreamDecoder& decoder, const ReplayOptions& opts = {},
                    const FrameSink& sink = {});

/// Expected emission count for a speed-0 replay.
std::size_t expected_emissions(std::size_t samples, std::size_t window_samples, std::size_t hop);

/// "t_s,thumb,index,middle,ring,pinky" rows, one per emitted frame.
std::string frames_csv(const std::vector<ForceFrameMsg>& frames);

/// TCP broadcaster: every connected subscriber receives each published frame.
/// Each client has its own sender thread and bounded queue; a client whose
/// queue overflows or whose socket fails is disconnected.
class Broadcaster {
 public:
  /// `endpoint` is "host:port"; port 0 picks a free port. Throws IoError when
  /// the address cannot be bound.
  explicit Broadcaster(const std::string& endpoint, std::size_t queue_limit = 256);
  ~Broadcaster();
  Broadcaster(const Broadcaster&) = delete;
  Broadcaster& operator=(const Broadcaster&) = delete;

  std::uint16_t port() const { return port_; }
  void publish(const ForceFrameMsg& msg);
  std::size_t clients() const;
  std::size_t dropped_clients() const { return dropped_clients_.load(); }
  void stop();

 private:
  struct Client;
  void accept_loop();

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::size_t queue_limit_;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> dropped_clients_{0};
  std::thread accept_thread_;
  mutable std::mutex mu_;
  std::list<std::shared_ptr<Client>> clients_;
};

/// Parses "host:port"; throws InvalidArgument.
std::pair<std::string, std::uint16_t> parse_endpoint(const std::string& endpoint);

/// Blocking client helper: connects and reads `count` frames.
std::vector<ForceFrameMsg> receive_frames(const std::string& endpoint, std::size_t count, int timeout_ms = 5000);

}  // namespace emgforge
