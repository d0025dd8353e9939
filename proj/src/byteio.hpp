#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ppbfl/error.hpp"

namespace ppbfl {

// Little-endian append helpers.
inline void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u64(std::vector<unsigned char>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_f64(std::vector<unsigned char>& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

inline void put_bytes(std::vector<unsigned char>& out, std::span<const unsigned char> b) {
  out.insert(out.end(), b.begin(), b.end());
}

// Bounds-checked little-endian reader; every overrun throws the caller's
// error code so each format reports its own malformed-input condition.
class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> data, Errc on_error)
      : data_(data), on_error_(on_error) {}

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const unsigned char> bytes(size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string str(size_t n) {
    auto s = bytes(n);
    return std::string(reinterpret_cast<const char*>(s.data()), s.size());
  }

  void expect_done(const char* what) {
    if (!done()) throw Error(on_error_, std::string("trailing bytes after ") + what);
  }

 private:
  void need(size_t n) {
    if (remaining() < n) throw Error(on_error_, "input truncated");
  }

  std::span<const unsigned char> data_;
  size_t pos_ = 0;
  Errc on_error_;
};

}  // namespace ppbfl
