#pragma once

// Test-only reference computations, kept independent of the library code
// paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Hamming(7,4) written straight from the parity equations.
inline std::uint32_t hamming_encode(std::uint32_t d) {
  const unsigned d1 = d & 1u, d2 = (d >> 1) & 1u, d3 = (d >> 2) & 1u, d4 = (d >> 3) & 1u;
  const unsigned p1 = d1 ^ d2 ^ d4, p2 = d1 ^ d3 ^ d4, p3 = d2 ^ d3 ^ d4;
  return d1 | d2 << 1 | d3 << 2 | d4 << 3 | p1 << 4 | p2 << 5 | p3 << 6;
}

inline unsigned popcount(std::uint32_t x) {
  unsigned n = 0;
  for (; x; x >>= 1) n += x & 1u;
  return n;
}

// Nearest-codeword decoding by exhaustive scan over the 16 codewords.
inline std::uint32_t hamming_ml_decode(std::uint32_t received) {
  std::uint32_t best = 0;
  unsigned best_d = 99;
  for (std::uint32_t d = 0; d < 16; ++d) {
    const unsigned dist = popcount(hamming_encode(d) ^ received);
    if (dist < best_d) {
      best_d = dist;
      best = d;
    }
  }
  return best;
}

// Central differences of f at x, perturbing one coordinate at a time.
inline std::vector<double> central_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// |a - n| / max(|a|, |n|, floor). The floor is the scale below which central
// differences at step 1e-6 are dominated by rounding.
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Minimum of sum w * popcount(word[a] ^ word[b]) over all injections of
// n classes into 2^bits words.
struct WeightedEdge {
  unsigned a, b;
  std::uint64_t w;
};

inline std::uint64_t exhaustive_assignment_optimum(unsigned n, unsigned bits, const std::vector<WeightedEdge>& edges) {
  const unsigned n_words = 1u << bits;
  std::vector<unsigned> words(n);
  std::vector<bool> used(n_words, false);
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  std::function<void(unsigned)> rec = [&](unsigned c) {
    if (c == n) {
      std::uint64_t cost = 0;
      for (const auto& e : edges) cost += e.w * popcount(words[e.a] ^ words[e.b]);
      best = std::min(best, cost);
      return;
    }
    for (unsigned w = 0; w < n_words; ++w) {
      if (used[w]) continue;
      used[w] = true;
      words[c] = w;
      rec(c + 1);
      used[w] = false;
    }
  };
  rec(0);
  return best;
}

}  // namespace oracle
