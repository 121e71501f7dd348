#pragma once

#include <cstring>
#include <span>
#include <string>

#include "decloud/types.hpp"

namespace decloud {

// Big-endian serialization helpers shared by the update canonical form and
// the wire format.

class ByteWriter {
 public:
  ByteWriter() = default;

  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(uint8_t(v >> 8));
    out_.push_back(uint8_t(v));
  }
  void u32(uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(uint8_t(v >> s));
  }
  void u64(uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(uint8_t(v >> s));
  }
  void raw(std::span<const uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  void raw(const uint8_t* p, size_t n) { raw(std::span<const uint8_t>(p, n)); }

  const uint8_t* data() const { return out_.data(); }
  size_t size() const { return out_.size(); }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> in) : in_(in) {}
  ByteReader(const uint8_t* p, size_t n)
      : in_(std::span<const uint8_t>(p, n)) {}

  bool ok() const { return ok_; }
  size_t remaining() const { return in_.size() - pos_; }

  uint8_t u8() { return take(1) ? in_[pos_ - 1] : 0; }
  uint16_t u16() {
    if (!take(2)) return 0;
    return uint16_t(in_[pos_ - 2]) << 8 | in_[pos_ - 1];
  }
  uint32_t u32() {
    if (!take(4)) return 0;
    uint32_t v = 0;
    for (size_t i = pos_ - 4; i < pos_; ++i) v = v << 8 | in_[i];
    return v;
  }
  uint64_t u64() {
    if (!take(8)) return 0;
    uint64_t v = 0;
    for (size_t i = pos_ - 8; i < pos_; ++i) v = v << 8 | in_[i];
    return v;
  }
  Bytes raw(size_t n) {
    if (!take(n)) return {};
    return Bytes(in_.begin() + (pos_ - n), in_.begin() + pos_);
  }
  void raw(uint8_t* dst, size_t n) {
    if (!take(n)) {
      std::memset(dst, 0, n);
      return;
    }
    std::memcpy(dst, in_.data() + (pos_ - n), n);
  }

 private:
  bool take(size_t n) {
    if (!ok_ || pos_ + n > in_.size()) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  bool ok_ = true;
};

inline std::string to_hex(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

}  // namespace decloud
