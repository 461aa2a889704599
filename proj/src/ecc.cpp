#include "compactseg/ecc.hpp"

#include <bit>

namespace compactseg::ecc {

namespace {

constexpr unsigned parity(std::uint32_t x) { return static_cast<unsigned>(std::popcount(x)) & 1u; }

constexpr std::array<std::int8_t, 8> build_syndrome_table() {
  std::array<std::int8_t, 8> table{-1, -1, -1, -1, -1, -1, -1, -1};
  for (unsigned j = 0; j < Hamming74::kCodeBits; ++j) {
    unsigned s = 0;
    for (unsigned r = 0; r < Hamming74::kParityBits; ++r) s |= ((Hamming74::kParityCheckRows[r] >> j) & 1u) << r;
    table[s] = static_cast<std::int8_t>(j);
  }
  return table;
}

constexpr auto kSyndromeTable = build_syndrome_table();

}  // namespace

std::uint8_t Hamming74::column_syndrome(unsigned j) {
  unsigned s = 0;
  for (unsigned r = 0; r < kParityBits; ++r) s |= parity_check(r, j) << r;
  return static_cast<std::uint8_t>(s);
}

std::optional<unsigned> Hamming74::error_position(std::uint8_t syndrome) {
  const int pos = kSyndromeTable.at(syndrome & 0x7u);
  if (pos < 0) return std::nullopt;
  return static_cast<unsigned>(pos);
}

std::uint32_t Hamming74::encode(std::uint32_t data) {
  if (data >= 16u) throw std::invalid_argument("Hamming74::encode: data word must be < 16");
  std::uint32_t code = 0;
  for (unsigned r = 0; r < kCodeBits; ++r) code |= parity(kGeneratorRows[r] & data) << r;
  return code;
}

std::uint8_t Hamming74::syndrome(std::uint32_t received) {
  unsigned s = 0;
  for (unsigned r = 0; r < kParityBits; ++r) s |= parity(kParityCheckRows[r] & received) << r;
  return static_cast<std::uint8_t>(s);
}

std::uint32_t Hamming74::correct(std::uint32_t received) {
  received &= 0x7Fu;
  if (const auto pos = error_position(syndrome(received))) received ^= 1u << *pos;
  return received;
}

}  // namespace compactseg::ecc
