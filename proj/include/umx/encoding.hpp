#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

#include "umx/common.hpp"

namespace umx {

// Canonical binary encoding used for every hashed or signed structure.
//
// Rules: fields are appended in declaration order; integers are fixed-width
// little-endian; variable-length data is prefixed with a u32 byte count;
// lists are prefixed with a u32 element count; every top-level structure
// starts with a 4-byte type tag. Two implementations that follow these rules
// produce identical digests.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

  void raw(std::span<const std::uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
  }

  template <std::size_t N>
  void fixed(const std::array<std::uint8_t, N>& a) {
    buf_.insert(buf_.end(), a.begin(), a.end());
  }

  void bytes(std::span<const std::uint8_t> data) {
    u32(static_cast<std::uint32_t>(data.size()));
    raw(data);
  }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  // 4-char structure tag, e.g. "BLK1".
  void tag(const char (&t)[5]) {
    buf_.insert(buf_.end(), t, t + 4);
  }

  template <typename Tag>
  void id(const Id16<Tag>& v) {
    fixed(v.bytes);
  }

  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

}  // namespace umx
