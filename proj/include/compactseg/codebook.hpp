#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compactseg/bits.hpp"

namespace compactseg {

enum class Scheme { Vanilla, Hamming74 };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

// Upper bound on data bits; class labels are 16-bit.
inline constexpr unsigned kMaxDataBits = 16;

// ceil(log2(n_classes)). Throws std::invalid_argument for n_classes < 2.
unsigned required_data_bits(unsigned n_classes);
// 7 * ceil(required_data_bits / 4).
unsigned required_hamming_bits(unsigned n_classes);
unsigned encoded_bits(Scheme scheme, unsigned n_data_bits);

// Output-tensor shrink relative to one channel per class, kept as the exact
// ratio of class count to encoded channel count.
struct ReductionFactor {
  unsigned n_classes = 0;
  unsigned n_channels = 0;
  double value() const { return static_cast<double>(n_classes) / static_cast<double>(n_channels); }
};

ReductionFactor memory_reduction_factor(unsigned n_classes, Scheme scheme);

// Injective map from class index to data word plus encoding metadata.
// Immutable; every constructor path validates injectivity and word range.
class Codebook {
 public:
  // n_data_bits defaults to required_data_bits(assignment.size()); an explicit
  // value must be at least that.
  Codebook(Scheme scheme, std::vector<std::uint32_t> assignment, unsigned background_class = 0,
           std::optional<unsigned> n_data_bits = std::nullopt);

  unsigned n_classes() const { return static_cast<unsigned>(assignment_.size()); }
  unsigned n_data_bits() const { return n_data_bits_; }
  unsigned n_encoded_bits() const { return encoded_bits(scheme_, n_data_bits_); }
  Scheme scheme() const { return scheme_; }
  unsigned background_class() const { return background_class_; }
  std::span<const std::uint32_t> assignment() const { return assignment_; }

  std::uint32_t word_of(unsigned class_index) const;
  DataWord data_word(unsigned class_index) const { return DataWord(word_of(class_index), n_data_bits_); }

  // Class owning a data word, or nullopt for unused words.
  std::optional<unsigned> class_of(std::uint32_t word) const;

  BitVector encode(unsigned class_index) const;
  void encode_into(unsigned class_index, std::span<std::uint8_t> out) const;

  bool operator==(const Codebook& other) const;

 private:
  Scheme scheme_;
  unsigned n_data_bits_;
  unsigned background_class_;
  std::vector<std::uint32_t> assignment_;
  std::vector<std::int32_t> lookup_;  // data word -> class, -1 when unused
};

Codebook identity_codebook(unsigned n_classes, Scheme scheme);
// Uniform random injection of classes into the 2^N_B data words.
Codebook build_random_codebook(unsigned n_classes, Scheme scheme, std::uint64_t seed);

// JSON document: format_version, n_classes, n_data_bits, n_encoded_bits,
// scheme, background_class, bit_order, assignment.
inline constexpr int kCodebookFormatVersion = 1;
std::string codebook_to_json(const Codebook& codebook);
Codebook codebook_from_json(std::string_view text);
void save_codebook(const Codebook& codebook, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// FNV-1a over the assignment, for quick identification in summaries.
std::uint64_t assignment_digest(const Codebook& codebook);

}  // namespace compactseg
