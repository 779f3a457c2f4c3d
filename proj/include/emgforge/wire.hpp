// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Force frame wire format, 33 bytes, little-endian:
//   "EF01" | u64 timestamp_us | 5 x f32 newtons | u8 flags

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "emgforge/signal.hpp"

namespace emgforge {

inline constexpr std::size_t kWireFrameBytes = 33;
inline constexpr std::uint8_t kFlagCalibrated = 0x01;

struct ForceFrameMsg {
  std::uint64_t timestamp_us = 0;
  std::array<float, kFingers> forces{};
  std::uint8_t flags = 0;

  bool operator==(const ForceFrameMsg&) const = default;
};

using WireFrame = std::array<std::uint8_t, kWireFrameBytes>;

WireFrame encode_frame(const ForceFrameMsg& msg);
/// Throws FormatError on a wrong length or magic.
ForceFrameMsg decode_frame(std::span<const std::uint8_t> bytes);

}  // namespace emgforge
