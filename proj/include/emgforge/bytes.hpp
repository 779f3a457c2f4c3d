// Copyright 2026 The emgforge Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Little-endian byte packing shared by the checkpoint, dataset and wire formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "emgforge/error.hpp"

namespace emgforge::bytes {

template <typename U>
void put_uint(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  put_uint(out, std::bit_cast<std::uint32_t>(f));
}

template <typename U>
U get_uint(std::span<const std::uint8_t> in) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in[i]) << (8 * i));
  return v;
}

inline float get_f32(std::span<const std::uint8_t> in) {
  return std::bit_cast<float>(get_uint<std::uint32_t>(in));
}

/// Sequential reader; every read names the field so truncation errors are useful.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* field) {
    if (pos_ + n > data_.size()) {
      throw FormatError(std::string("truncated input while reading ") + field);
    }
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U uint(const char* field) {
    return get_uint<U>(take(sizeof(U), field));
  }
  float f32(const char* field) { return get_f32(take(4, field)); }
  std::string str(std::size_t n, const char* field) {
    auto s = take(n, field);
    return std::string(s.begin(), s.end());
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace emgforge::bytes
