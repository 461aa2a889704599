#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace compactseg {

// One bit per element, values 0 or 1. Bit k of a word is element k (LSB-first).
using BitVector = std::vector<std::uint8_t>;

// An unsigned value together with the number of bits it occupies.
class DataWord {
 public:
  static constexpr unsigned kMaxWidth = 31;

  DataWord(std::uint32_t value, unsigned width) : value_(value), width_(width) {
    if (width == 0 || width > kMaxWidth) {
      throw std::invalid_argument("data word width must be in [1, 31], got " + std::to_string(width));
    }
    if (value >> width != 0) {
      throw std::invalid_argument("data word value " + std::to_string(value) + " does not fit in " +
                                  std::to_string(width) + " bits");
    }
  }

  std::uint32_t value() const { return value_; }
  unsigned width() const { return width_; }
  unsigned bit(unsigned k) const { return (value_ >> k) & 1u; }

  bool operator==(const DataWord&) const = default;

 private:
  std::uint32_t value_;
  unsigned width_;
};

inline unsigned hamming_distance(std::uint32_t a, std::uint32_t b) {
  return static_cast<unsigned>(std::popcount(a ^ b));
}

inline BitVector to_bits(std::uint32_t value, unsigned width) {
  BitVector bits(width);
  for (unsigned k = 0; k < width; ++k) bits[k] = static_cast<std::uint8_t>((value >> k) & 1u);
  return bits;
}

}  // namespace compactseg
