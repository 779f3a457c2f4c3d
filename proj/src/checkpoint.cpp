// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "emgforge/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <limits>

#include "emgforge/bytes.hpp"
#include "emgforge/error.hpp"

namespace emgforge {

namespace {
constexpr char kMagic[4] = {'E', 'F', 'N', 'N'};
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  bytes::put_uint<std::uint16_t>(out, kCheckpointVersion);
  bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config_json.size()));
  out.insert(out.end(), ckpt.config_json.begin(), ckpt.config_json.end());
  bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("checkpoint: parameter name too long: " + e.name);
    }
    std::size_t count = 1;
    for (auto d : e.dims) count *= d;
    if (count != e.data.size()) throw ShapeError("checkpoint: dims/data mismatch for " + e.name);
    bytes::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    bytes::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) bytes::put_uint<std::uint32_t>(out, d);
    out.reserve(out.size() + 4 * e.data.size());
    for (float f : e.data) bytes::put_f32(out, f);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& data) {
  bytes::Reader r(data);
  const auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("checkpoint: bad magic");
  const auto version = r.uint<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto config_len = r.uint<std::uint32_t>("config_len");
  ckpt.config_json = r.str(config_len, "config");
  const auto count = r.uint<std::uint32_t>("count");
  ckpt.entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const auto name_len = r.uint<std::uint16_t>("name_len");
    e.name = r.str(name_len, "name");
    const auto rank = r.uint<std::uint8_t>("rank");
    std::size_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.uint<std::uint32_t>("dims"));
      n *= e.dims.back();
    }
    if (n > r.remaining() / 4) throw FormatError("checkpoint: truncated data for " + e.name);
    e.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) e.data[k] = r.f32("data");
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes after last parameter");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto data = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(data);
}

}  // namespace emgforge
