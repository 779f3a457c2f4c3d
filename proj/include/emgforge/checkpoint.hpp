// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Little-endian parameter checkpoint:
//
//   "EFNN" | u16 version | u32 config_len | config_len bytes of UTF-8 JSON |
//   u32 count | count x { u16 name_len | name | u8 rank | rank x u32 dim |
//                         product(dims) x f32 }

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace emgforge {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  std::string config_json;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError naming the field that failed to parse.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace emgforge
