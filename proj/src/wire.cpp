// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/wire.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "emgforge/bytes.hpp"
#include "emgforge/error.hpp"

namespace emgforge {

namespace {
constexpr std::array<std::uint8_t, 4> kMagic = {'E', 'F', '0', '1'};
}

WireFrame encode_frame(const ForceFrameMsg& msg) {
  std::vector<std::uint8_t> buf(kMagic.begin(), kMagic.end());
  buf.reserve(kWireFrameBytes);
  bytes::put_uint<std::uint64_t>(buf, msg.timestamp_us);
  for (float f : msg.forces) bytes::put_f32(buf, f);
  buf.push_back(msg.flags);
  WireFrame out{};
  std::copy(buf.begin(), buf.end(), out.begin());
  return out;
}

ForceFrameMsg decode_frame(std::span<const std::uint8_t> data) {
  if (data.size() != kWireFrameBytes) {
    throw FormatError("wire frame: length " + std::to_string(data.size()) + ", expected 33");
  }
  bytes::Reader r(data);
  const auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("wire frame: bad magic");
  ForceFrameMsg m;
  m.timestamp_us = r.uint<std::uint64_t>("timestamp_us");
  for (float& f : m.forces) f = r.f32("forces");
  m.flags = r.uint<std::uint8_t>("flags");
  return m;
}

}  // namespace emgforge
