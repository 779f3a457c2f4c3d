// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "emgforge/dataset.hpp"
#include "emgforge/error.hpp"

namespace emgforge {

namespace {

struct Pulse {
  double onset = 0.0;
  double duration = 0.0;
  double peak = 0.0;
};

// Raised-cosine bump: 0 at both ends, `peak` at the centre.
double pulse_value(const Pulse& p, double t) {
  const double u = (t - p.onset) / p.duration;
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return p.peak * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u));
}

std::vector<Pulse> draw_pulses(const SyntheticConfig& cfg, double cap, double duration_s, std::mt19937_64& rng) {
  std::vector<Pulse> out;
  if (cfg.pulse_rate_hz <= 0.0) return out;
  std::exponential_distribution<double> gap(cfg.pulse_rate_hz);
  std::uniform_real_distribution<double> len(cfg.min_pulse_s, cfg.max_pulse_s);
  std::uniform_real_distribution<double> peak(cfg.min_peak_fraction, 1.0);
  double last_end = -1e300;
  double t = 0.0;
  for (;;) {
    t += gap(rng);
    if (t >= duration_s) break;
    Pulse p{t, len(rng), peak(rng) * cap};
    // overlapping or crowded candidates are rejected, as are pulses cut by the end
    if (p.onset < last_end + cfg.min_gap_s || p.onset + p.duration > duration_s) continue;
    out.push_back(p);
    last_end = p.onset + p.duration;
  }
  return out;
}

// Band-limited noise: white Gaussian through an RBJ band-pass biquad, scaled to unit RMS.
std::vector<double> carrier(double centre_hz, double bandwidth_hz, double rate_hz, std::size_t n,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> white(0.0, 1.0);
  const double w0 = 2.0 * std::numbers::pi * centre_hz / rate_hz;
  const double q = centre_hz / bandwidth_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  const std::size_t warmup = 2048;
  std::vector<double> out(n);
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < n + warmup; ++i) {
    const double x = white(rng);
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    if (i >= warmup) out[i - warmup] = y;
  }
  double ss = 0.0;
  for (double v : out) ss += v * v;
  const double rms = n ? std::sqrt(ss / static_cast<double>(n)) : 1.0;
  if (rms > 0.0) {
    for (double& v : out) v /= rms;
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  for (std::size_t i = 0; i < kFingers; ++i) {
    bool any = false;
    for (std::size_t c = 0; c < kEmgChannels; ++c) {
      if (mixing[c][i] < 0.0 || !std::isfinite(mixing[c][i])) {
        throw ConfigError("synthetic: mixing gains must be finite and non-negative");
      }
      any = any || mixing[c][i] > 0.0;
    }
    if (!any) {
      throw ConfigError("synthetic: finger " + std::string(kFingerNames[i]) +
                        " has no channel with positive gain (unidentifiable mixing matrix)");
    }
    if (caps[i] <= 0.0 || caps[i] > f_max) {
      throw ConfigError("synthetic: cap for " + std::string(kFingerNames[i]) + " must be in (0, f_max]");
    }
  }
  if (band_lo_hz < 0.0 || band_hi_hz <= band_lo_hz || band_hi_hz >= emg_rate_hz / 2.0) {
    throw ConfigError("synthetic: carrier band must satisfy 0 <= lo < hi < Nyquist");
  }
  if (carrier_bandwidth_hz <= 0.0) throw ConfigError("synthetic: carrier bandwidth must be positive");
  for (const auto& row : carrier_hz) {
    for (double f : row) {
      if (f - carrier_bandwidth_hz / 2.0 < band_lo_hz - 1e-9 || f + carrier_bandwidth_hz / 2.0 > band_hi_hz + 1e-9) {
        throw ConfigError("synthetic: carrier " + std::to_string(f) + " Hz leaves the [" +
                          std::to_string(band_lo_hz) + ", " + std::to_string(band_hi_hz) + "] Hz band");
      }
    }
  }
  if (gamma <= 0.0) throw ConfigError("synthetic: gamma must be positive");
  if (noise_floor < 0.0) throw ConfigError("synthetic: noise floor must be non-negative");
  if (pulse_rate_hz < 0.0) throw ConfigError("synthetic: pulse rate must be non-negative");
  if (min_pulse_s <= 0.0 || max_pulse_s < min_pulse_s) throw ConfigError("synthetic: bad pulse duration range");
  if (min_peak_fraction <= 0.0 || min_peak_fraction > 1.0) {
    throw ConfigError("synthetic: min_peak_fraction must be in (0, 1]");
  }
  if (emg_rate_hz <= 0.0) throw ConfigError("synthetic: emg rate must be positive");
  if (force_rate_hz < 100.0 || force_rate_hz > 150.0) throw ConfigError("synthetic: force rate outside [100, 150] Hz");
  action_fingers(action);
}

SyntheticConfig synthetic_subject(std::uint64_t subject_seed, double variability) {
  SyntheticConfig cfg;
  std::mt19937_64 rng(subject_seed ^ 0x5eed5eed5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Shared anatomy: finger i sits around channel position 1.6 i on a ring of 8
  // electrodes and its motor units fire in a band centred at 60 + 70 i Hz.
  // Each subject wears the band rotated and sees a wider or narrower spread.
  std::uniform_real_distribution<double> turn(-1.2, 1.2);
  const double rotation = variability * turn(rng);
  const double spread = 1.2 * std::exp(0.2 * variability * gauss(rng));
  const double subject_gain = std::exp(0.25 * variability * gauss(rng));
  const double lo = cfg.band_lo_hz + cfg.carrier_bandwidth_hz / 2.0;
  const double hi = cfg.band_hi_hz - cfg.carrier_bandwidth_hz / 2.0;
  for (std::size_t c = 0; c < kEmgChannels; ++c) {
    for (std::size_t i = 0; i < kFingers; ++i) {
      const double centre = 1.6 * static_cast<double>(i) + rotation;
      double d = std::fmod(std::fabs(static_cast<double>(c) - centre), static_cast<double>(kEmgChannels));
      d = std::min(d, static_cast<double>(kEmgChannels) - d);
      const double base = 0.15 + std::exp(-0.5 * d * d / (spread * spread));
      cfg.mixing[c][i] = subject_gain * base * std::exp(0.3 * variability * gauss(rng));
      const double f = 60.0 + 70.0 * static_cast<double>(i) + 12.0 * variability * gauss(rng);
      cfg.carrier_hz[c][i] = std::clamp(f, lo, hi);
    }
  }
  cfg.subject = "S" + std::to_string(subject_seed);
  cfg.seed = subject_seed;
  return cfg;
}

SyntheticConfig synthetic_session(const SyntheticConfig& subject, std::uint64_t session_seed, double drift) {
  SyntheticConfig cfg = subject;
  std::mt19937_64 rng(session_seed ^ 0xd21f7d21f7ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& row : cfg.mixing) {
    for (double& g : row) g *= std::exp(drift * gauss(rng));
  }
  cfg.seed = session_seed;
  return cfg;
}

Recording synth_generate(const SyntheticConfig& config, double duration_s) {
  config.validate();
  if (!(duration_s >= 2.0)) throw InvalidArgument("synth_generate: duration must be >= 2 s");
  std::mt19937_64 rng(config.seed);

  const auto active = action_fingers(config.action);
  std::array<std::vector<Pulse>, kFingers> pulses;
  for (std::size_t i : active) pulses[i] = draw_pulses(config, config.caps[i], duration_s, rng);

  auto force_at = [&](std::size_t finger, double t) {
    double f = 0.0;
    for (const auto& p : pulses[finger]) f += pulse_value(p, t);
    return f;
  };

  Recording rec;
  rec.subject = config.subject;
  rec.session = config.session;
  rec.action = config.action;
  rec.hand = config.hand;

  const auto n = static_cast<std::size_t>(std::floor(duration_s * config.emg_rate_hz));
  std::array<std::vector<double>, kFingers> activation;
  for (std::size_t i = 0; i < kFingers; ++i) {
    activation[i].assign(n, 0.0);
    if (pulses[i].empty()) continue;
    for (std::size_t s = 0; s < n; ++s) {
      const double f = force_at(i, static_cast<double>(s) / config.emg_rate_hz);
      if (f > 0.0) activation[i][s] = std::pow(f / config.caps[i], config.gamma);
    }
  }

  rec.emg.rate_hz = config.emg_rate_hz;
  rec.emg.samples.assign(kEmgChannels, std::vector<float>(n));
  std::vector<double> acc(n);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t c = 0; c < kEmgChannels; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < kFingers; ++i) {
      // carriers are drawn even for idle fingers so the stream layout is stable
      const auto carr = carrier(config.carrier_hz[c][i], config.carrier_bandwidth_hz, config.emg_rate_hz, n, rng);
      if (pulses[i].empty() || config.mixing[c][i] == 0.0) continue;
      for (std::size_t s = 0; s < n; ++s) acc[s] += config.mixing[c][i] * activation[i][s] * carr[s];
    }
    for (std::size_t s = 0; s < n; ++s) {
      rec.emg.samples[c][s] = static_cast<float>(acc[s] + config.noise_floor * noise(rng));
    }
  }

  const auto m = static_cast<std::size_t>(std::floor(duration_s * config.force_rate_hz));
  rec.force.times_s.resize(m);
  rec.force.values.assign(kFingers, std::vector<float>(m, 0.0f));
  for (std::size_t k = 0; k < m; ++k) {
    const double t = static_cast<double>(k) / config.force_rate_hz;
    rec.force.times_s[k] = t;
    for (std::size_t i = 0; i < kFingers; ++i) {
      rec.force.values[i][k] = static_cast<float>(std::min(force_at(i, t), config.caps[i]));
    }
  }
  return rec;
}

}  // namespace emgforge
