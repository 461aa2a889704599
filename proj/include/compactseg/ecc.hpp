#pragma once

#include <array>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "compactseg/bits.hpp"

namespace compactseg::ecc {

// Hamming(7,4) in systematic layout. Codeword bit positions 0..3 carry the data
// bits d1..d4 (data bit 0 first), positions 4..6 carry the parities
//   p1 = d1^d2^d4, p2 = d1^d3^d4, p3 = d2^d3^d4.
// Matrices are stored row-wise as bit masks; the generator is 7x4 (applied to a
// 4-vector), the parity check is 3x7.
class Hamming74 {
 public:
  static constexpr unsigned kDataBits = 4;
  static constexpr unsigned kCodeBits = 7;
  static constexpr unsigned kParityBits = 3;

  // Row r: mask over the 4 data bits feeding codeword bit r.
  static constexpr std::array<std::uint8_t, kCodeBits> kGeneratorRows = {
      0b0001, 0b0010, 0b0100, 0b1000, 0b1011, 0b1101, 0b1110};
  // Row r: mask over the 7 codeword bits checked by syndrome bit r.
  static constexpr std::array<std::uint8_t, kParityBits> kParityCheckRows = {
      0b0011011, 0b0101101, 0b1001110};

  static std::uint8_t generator(unsigned row, unsigned col) { return (kGeneratorRows.at(row) >> col) & 1u; }
  static std::uint8_t parity_check(unsigned row, unsigned col) { return (kParityCheckRows.at(row) >> col) & 1u; }

  // Syndrome value of a single error at codeword position j (column j of P).
  static std::uint8_t column_syndrome(unsigned j);

  // Codeword position flagged by a nonzero syndrome; nullopt for 0.
  static std::optional<unsigned> error_position(std::uint8_t syndrome);

  static std::uint32_t encode(std::uint32_t data);
  static std::uint8_t syndrome(std::uint32_t received);
  // Flips the bit indicated by the syndrome. Two or more errors miscorrect silently.
  static std::uint32_t correct(std::uint32_t received);
  static std::uint32_t extract_data(std::uint32_t codeword) { return codeword & 0xFu; }
  static std::uint32_t decode(std::uint32_t received) { return extract_data(correct(received)); }
};

// Minimal contract for a block code usable by the chunked coder. A longer code
// (e.g. a 15-bit one covering all 7 data bits) only has to provide these.
template <typename Code>
concept BlockCode = requires(std::uint32_t w) {
  { Code::kDataBits } -> std::convertible_to<unsigned>;
  { Code::kCodeBits } -> std::convertible_to<unsigned>;
  { Code::encode(w) } -> std::convertible_to<std::uint32_t>;
  { Code::decode(w) } -> std::convertible_to<std::uint32_t>;
};

template <BlockCode Code = Hamming74>
constexpr unsigned chunk_count(unsigned data_width) {
  return (data_width + Code::kDataBits - 1) / Code::kDataBits;
}

template <BlockCode Code = Hamming74>
constexpr unsigned chunked_length(unsigned data_width) {
  return Code::kCodeBits * chunk_count<Code>(data_width);
}

// Splits the word LSB-first into kDataBits chunks (high chunk zero-padded) and
// writes the concatenated codewords into out, which must hold
// chunked_length(width) bits.
template <BlockCode Code = Hamming74>
void encode_chunked_into(const DataWord& word, std::span<std::uint8_t> out) {
  const unsigned chunks = chunk_count<Code>(word.width());
  if (out.size() != chunks * Code::kCodeBits) {
    throw std::invalid_argument("encode_chunked: output holds " + std::to_string(out.size()) + " bits, expected " +
                                std::to_string(chunks * Code::kCodeBits));
  }
  constexpr std::uint32_t mask = (1u << Code::kDataBits) - 1u;
  for (unsigned c = 0; c < chunks; ++c) {
    const std::uint32_t data = (word.value() >> (c * Code::kDataBits)) & mask;
    const std::uint32_t code = Code::encode(data);
    for (unsigned k = 0; k < Code::kCodeBits; ++k) {
      out[c * Code::kCodeBits + k] = static_cast<std::uint8_t>((code >> k) & 1u);
    }
  }
}

template <BlockCode Code = Hamming74>
BitVector encode_chunked(const DataWord& word) {
  BitVector out(chunked_length<Code>(word.width()));
  encode_chunked_into<Code>(word, out);
  return out;
}

// Per-chunk correction and data extraction; padding bits above data_width are
// dropped.
template <BlockCode Code = Hamming74>
DataWord decode_chunked(std::span<const std::uint8_t> bits, unsigned data_width) {
  const unsigned expected = chunked_length<Code>(data_width);
  if (bits.size() != expected) {
    throw std::invalid_argument("decode_chunked: got " + std::to_string(bits.size()) + " bits, expected " +
                                std::to_string(expected) + " for data width " + std::to_string(data_width));
  }
  std::uint32_t value = 0;
  for (unsigned c = 0; c < chunk_count<Code>(data_width); ++c) {
    std::uint32_t received = 0;
    for (unsigned k = 0; k < Code::kCodeBits; ++k) {
      received |= static_cast<std::uint32_t>(bits[c * Code::kCodeBits + k] & 1u) << k;
    }
    value |= Code::decode(received) << (c * Code::kDataBits);
  }
  const std::uint32_t keep = data_width >= 32 ? ~0u : ((1u << data_width) - 1u);
  return DataWord(value & keep, data_width);
}

}  // namespace compactseg::ecc
