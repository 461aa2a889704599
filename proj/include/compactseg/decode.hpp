#pragma once

#include <cstddef>
#include <cstdint>

#include "compactseg/codebook.hpp"
#include "compactseg/volume.hpp"

namespace compactseg {

inline constexpr float kDecisionThreshold = 0.5f;

struct DecodeOptions {
  // Worker threads over fixed voxel blocks; output is identical for any value.
  unsigned threads = 1;
};

// bit = 1 iff p >= threshold. Requires 0 < threshold < 1.
BitVolume binarize(const ProbVolume& probs, float threshold = kDecisionThreshold);

// Crisp encoded bits of every voxel label.
BitVolume encode_labels(const LabelVolume& labels, const Codebook& codebook);

// Threshold at 0.5, syndrome-correct each chunk (Hamming74), look the data word
// up; unused words map to the codebook's background class.
LabelVolume hard_decode(const ProbVolume& probs, const Codebook& codebook, DecodeOptions options = {});
LabelVolume hard_decode_bits(const BitVolume& bits, const Codebook& codebook, DecodeOptions options = {});

// Nearest full codeword in Euclidean distance, scanning all classes; ties go to
// the lowest class index.
LabelVolume soft_decode(const ProbVolume& probs, const Codebook& codebook, DecodeOptions options = {});

struct CorruptionResult {
  BitVolume bits;
  std::size_t flips = 0;
};

// Flips each bit independently with the given probability, in storage order.
CorruptionResult corrupt_bits(const BitVolume& bits, double flip_probability, std::uint64_t seed);

}  // namespace compactseg
