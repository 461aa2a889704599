#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace compactseg {

// Seeded generator with platform-independent draws. std::mt19937_64 output is
// fixed by the standard; the std distributions are not, so the few we need are
// implemented here on top of the raw stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Independent stream for a (seed, purpose) pair, so that adding a consumer of
// randomness does not perturb the draws of another.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace compactseg
