#pragma once

#include <cstdint>
#include <vector>

#include "pits/errors.hpp"

namespace pits {

/// Bit-packed stream, MSB-first within each byte. Values are written with
/// their bit 0 first, so a run of size_p-bit words occupies exactly
/// ceil(n * size_p / 8) bytes with no per-word padding.
class BitWriter {
 public:
  void put(uint64_t value, unsigned nbits) {
    for (unsigned j = 0; j < nbits; ++j) {
      if (bits_ % 8 == 0) buf_.push_back(0);
      if ((value >> j) & 1) buf_.back() |= uint8_t(1) << (7 - bits_ % 8);
      ++bits_;
    }
  }

  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }
  std::size_t bit_count() const { return bits_; }

 private:
  std::vector<uint8_t> buf_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const uint8_t> data) : data_(data) {}

  uint64_t get(unsigned nbits) {
    uint64_t v = 0;
    for (unsigned j = 0; j < nbits; ++j) {
      if (pos_ >= data_.size() * 8) fail(Err::io_error, "bit stream exhausted");
      uint64_t bit = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
      v |= bit << j;
      ++pos_;
    }
    return v;
  }

  std::size_t bits_left() const { return data_.size() * 8 - pos_; }

 private:
  std::span<const uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace pits
