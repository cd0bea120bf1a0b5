#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ltraj {

/// Little-endian binary buffer writer. Collects into a string so callers can
/// write whole files atomically.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void bytes(const void* p, size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  void magic(std::string_view m) { buf_.append(m); }

  const std::string& str() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Reader matching ByteWriter; throws on truncation. Takes ownership when
/// given an rvalue string so `ByteReader r(read_file(p))` is safe.
class ByteReader {
 public:
  explicit ByteReader(std::string&& data)
      : owned_(std::move(data)), data_(owned_) {}
  explicit ByteReader(std::string_view data) : data_(data) {}

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(data_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void expect_magic(std::string_view m, const char* what) {
    if (data_.substr(pos_, m.size()) != m)
      throw std::runtime_error(std::string(what) + ": bad magic");
    pos_ += m.size();
  }
  bool at_end() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > data_.size()) throw std::runtime_error("truncated data");
  }
  std::string owned_;
  std::string_view data_;
  size_t pos_ = 0;
};

}  // namespace ltraj
