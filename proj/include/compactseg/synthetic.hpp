#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "compactseg/volume.hpp"

namespace compactseg {

// Voronoi-style label maps with per-pixel noisy class evidence. One template
// layout per dataset (seed points with skewed weights, so region sizes vary a
// lot); each image jitters the template, which keeps class adjacency
// consistent across images the way anatomy is across scans.
struct SyntheticConfig {
  unsigned n_classes = 16;
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t n_train = 8;
  std::size_t n_val = 4;
  double noise_sigma = 0.5;  // additive Gaussian noise on the evidence
  unsigned blur_radius = 1;  // box blur of the one-hot evidence, 0 = none
  double size_skew = 0.6;    // log-normal spread of the seed weights
  double jitter = 1.0;       // per-image seed displacement (pixels, std dev)
  std::uint64_t seed = 1;
  unsigned max_attempts = 64;  // template redraws until every class appears in training
};

struct SyntheticImage {
  LabelVolume labels;           // dims (width, height, 1)
  std::vector<float> features;  // pixel-major: features[p * n_classes + c]
};

struct SyntheticDataset {
  SyntheticConfig config;
  unsigned attempt = 0;  // template redraw that satisfied coverage
  std::vector<SyntheticImage> train;
  std::vector<SyntheticImage> val;

  std::size_t n_features() const { return config.n_classes; }
};

// Deterministic per config. Throws std::invalid_argument on invalid config and
// std::runtime_error if coverage cannot be reached within max_attempts.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

void validate(const SyntheticConfig& config);

}  // namespace compactseg
