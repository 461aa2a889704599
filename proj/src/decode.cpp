#include "compactseg/decode.hpp"

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "compactseg/ecc.hpp"
#include "compactseg/rng.hpp"
#include "parallel.hpp"

namespace compactseg {

namespace {

void check_channels(std::size_t actual, const Codebook& codebook) {
  if (actual != codebook.n_encoded_bits()) {
    throw std::invalid_argument("channel count mismatch: codebook (" + std::string(to_string(codebook.scheme())) +
                                ", " + std::to_string(codebook.n_classes()) + " classes) expects " +
                                std::to_string(codebook.n_encoded_bits()) + " channels, volume has " +
                                std::to_string(actual));
  }
}

// Data word carried by one voxel's encoded bits (chunk-corrected for Hamming).
std::uint32_t received_word(const std::uint8_t* bits, const Codebook& codebook) {
  std::uint32_t word = 0;
  if (codebook.scheme() == Scheme::Vanilla) {
    for (unsigned k = 0; k < codebook.n_data_bits(); ++k) word |= static_cast<std::uint32_t>(bits[k] & 1u) << k;
    return word;
  }
  using ecc::Hamming74;
  const unsigned chunks = ecc::chunk_count<Hamming74>(codebook.n_data_bits());
  for (unsigned c = 0; c < chunks; ++c) {
    std::uint32_t received = 0;
    for (unsigned k = 0; k < Hamming74::kCodeBits; ++k) {
      received |= static_cast<std::uint32_t>(bits[c * Hamming74::kCodeBits + k] & 1u) << k;
    }
    word |= Hamming74::decode(received) << (c * Hamming74::kDataBits);
  }
  // padding bits beyond n_data_bits may be miscorrected to 1; they carry no data
  return word & ((1u << codebook.n_data_bits()) - 1u);
}

template <typename T, typename ToBit>
LabelVolume hard_decode_impl(const PlanarVolume<T>& volume, const Codebook& codebook, DecodeOptions options,
                             ToBit to_bit) {
  check_channels(volume.n_channels(), codebook);
  const std::size_t n = volume.n_voxels();
  const std::size_t k_bits = volume.n_channels();
  std::vector<std::uint16_t> labels(n);
  detail::for_each_block(n, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::uint8_t> bits(k_bits);
    for (std::size_t v = begin; v < end; ++v) {
      for (std::size_t k = 0; k < k_bits; ++k) bits[k] = to_bit(volume.at(k, v));
      const auto cls = codebook.class_of(received_word(bits.data(), codebook));
      labels[v] = static_cast<std::uint16_t>(cls.value_or(codebook.background_class()));
    }
  });
  return LabelVolume(volume.dims(), std::move(labels));
}

}  // namespace

BitVolume binarize(const ProbVolume& probs, float threshold) {
  if (!(threshold > 0.0f && threshold < 1.0f)) throw std::invalid_argument("threshold must lie in (0, 1)");
  BitVolume bits(probs.dims(), probs.n_channels());
  const auto in = probs.values();
  auto out = bits.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= threshold ? 1 : 0;
  return bits;
}

BitVolume encode_labels(const LabelVolume& labels, const Codebook& codebook) {
  const std::size_t k_bits = codebook.n_encoded_bits();
  BitVolume bits(labels.dims(), k_bits);
  std::vector<BitVector> table(codebook.n_classes());
  for (unsigned c = 0; c < codebook.n_classes(); ++c) table[c] = codebook.encode(c);
  for (std::size_t v = 0; v < labels.size(); ++v) {
    const unsigned c = labels[v];
    if (c >= codebook.n_classes()) {
      throw std::invalid_argument("label " + std::to_string(c) + " at voxel " + std::to_string(v) + " exceeds " +
                                  std::to_string(codebook.n_classes()) + " classes");
    }
    for (std::size_t k = 0; k < k_bits; ++k) bits.at(k, v) = table[c][k];
  }
  return bits;
}

LabelVolume hard_decode(const ProbVolume& probs, const Codebook& codebook, DecodeOptions options) {
  check_channels(probs.n_channels(), codebook);
  check_probabilities(probs);
  return hard_decode_impl(probs, codebook, options,
                          [](float p) -> std::uint8_t { return p >= kDecisionThreshold ? 1 : 0; });
}

LabelVolume hard_decode_bits(const BitVolume& bits, const Codebook& codebook, DecodeOptions options) {
  return hard_decode_impl(bits, codebook, options, [](std::uint8_t b) -> std::uint8_t { return b & 1u; });
}

LabelVolume soft_decode(const ProbVolume& probs, const Codebook& codebook, DecodeOptions options) {
  check_channels(probs.n_channels(), codebook);
  check_probabilities(probs);
  const std::size_t n = probs.n_voxels();
  const std::size_t k_bits = probs.n_channels();
  const unsigned n_classes = codebook.n_classes();
  std::vector<double> codewords(static_cast<std::size_t>(n_classes) * k_bits);
  for (unsigned c = 0; c < n_classes; ++c) {
    const BitVector bits = codebook.encode(c);
    for (std::size_t k = 0; k < k_bits; ++k) codewords[c * k_bits + k] = bits[k];
  }
  std::vector<std::uint16_t> labels(n);
  detail::for_each_block(n, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> p(k_bits);
    for (std::size_t v = begin; v < end; ++v) {
      for (std::size_t k = 0; k < k_bits; ++k) p[k] = probs.at(k, v);
      unsigned best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (unsigned c = 0; c < n_classes; ++c) {
        const double* cw = &codewords[c * k_bits];
        double d = 0.0;
        for (std::size_t k = 0; k < k_bits; ++k) {
          const double diff = p[k] - cw[k];
          d += diff * diff;
        }
        if (d < best_dist) {
          best_dist = d;
          best = c;
        }
      }
      labels[v] = static_cast<std::uint16_t>(best);
    }
  });
  return LabelVolume(probs.dims(), std::move(labels));
}

CorruptionResult corrupt_bits(const BitVolume& bits, double flip_probability, std::uint64_t seed) {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw std::invalid_argument("flip probability must lie in [0, 1]");
  }
  CorruptionResult result{bits, 0};
  Rng rng(seed);
  for (auto& b : result.bits.values()) {
    if (rng.bernoulli(flip_probability)) {
      b = static_cast<std::uint8_t>((b & 1u) ^ 1u);
      ++result.flips;
    }
  }
  return result;
}

}  // namespace compactseg
