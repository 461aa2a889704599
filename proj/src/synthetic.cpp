#include "compactseg/synthetic.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "compactseg/rng.hpp"

namespace compactseg {

namespace {

struct Site {
  double x, y, weight;
};

LabelVolume rasterize(const std::vector<Site>& sites, std::size_t width, std::size_t height) {
  LabelVolume labels(Dims{width, height, 1});
  for (std::size_t j = 0; j < height; ++j) {
    for (std::size_t i = 0; i < width; ++i) {
      // multiplicatively weighted Voronoi: small weight -> small region
      double best = std::numeric_limits<double>::infinity();
      unsigned owner = 0;
      for (unsigned c = 0; c < sites.size(); ++c) {
        const double dx = static_cast<double>(i) + 0.5 - sites[c].x;
        const double dy = static_cast<double>(j) + 0.5 - sites[c].y;
        const double d = std::sqrt(dx * dx + dy * dy) / sites[c].weight;
        if (d < best) {
          best = d;
          owner = c;
        }
      }
      labels.at(i, j, 0) = static_cast<std::uint16_t>(owner);
    }
  }
  return labels;
}

// Separable box blur of one pixel-major channel stack, clamped at the edges.
void box_blur(std::vector<float>& data, std::size_t width, std::size_t height, std::size_t channels, unsigned radius) {
  if (radius == 0) return;
  std::vector<float> tmp(data.size());
  const auto r = static_cast<long>(radius);
  const float norm = 1.0f / static_cast<float>(2 * r + 1);
  auto clampi = [](long v, long hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
  for (std::size_t j = 0; j < height; ++j) {
    for (std::size_t i = 0; i < width; ++i) {
      float* out = &tmp[(j * width + i) * channels];
      for (std::size_t c = 0; c < channels; ++c) out[c] = 0.0f;
      for (long d = -r; d <= r; ++d) {
        const auto ii = static_cast<std::size_t>(clampi(static_cast<long>(i) + d, static_cast<long>(width) - 1));
        const float* in = &data[(j * width + ii) * channels];
        for (std::size_t c = 0; c < channels; ++c) out[c] += in[c];
      }
      for (std::size_t c = 0; c < channels; ++c) out[c] *= norm;
    }
  }
  for (std::size_t j = 0; j < height; ++j) {
    for (std::size_t i = 0; i < width; ++i) {
      float* out = &data[(j * width + i) * channels];
      for (std::size_t c = 0; c < channels; ++c) out[c] = 0.0f;
      for (long d = -r; d <= r; ++d) {
        const auto jj = static_cast<std::size_t>(clampi(static_cast<long>(j) + d, static_cast<long>(height) - 1));
        const float* in = &tmp[(jj * width + i) * channels];
        for (std::size_t c = 0; c < channels; ++c) out[c] += in[c];
      }
      for (std::size_t c = 0; c < channels; ++c) out[c] *= norm;
    }
  }
}

SyntheticImage make_image(const std::vector<Site>& base, const SyntheticConfig& cfg, Rng& rng) {
  std::vector<Site> sites = base;
  for (auto& s : sites) {
    s.x += cfg.jitter * rng.normal();
    s.y += cfg.jitter * rng.normal();
  }
  SyntheticImage img{rasterize(sites, cfg.width, cfg.height), {}};
  const std::size_t n_pixels = cfg.width * cfg.height;
  img.features.assign(n_pixels * cfg.n_classes, 0.0f);
  for (std::size_t p = 0; p < n_pixels; ++p) img.features[p * cfg.n_classes + img.labels[p]] = 1.0f;
  box_blur(img.features, cfg.width, cfg.height, cfg.n_classes, cfg.blur_radius);
  if (cfg.noise_sigma > 0.0) {
    for (auto& f : img.features) f += static_cast<float>(cfg.noise_sigma * rng.normal());
  }
  return img;
}

}  // namespace

void validate(const SyntheticConfig& c) {
  if (c.n_classes < 2 || c.n_classes > 65535) throw std::invalid_argument("synthetic: n_classes must be in [2, 65535]");
  if (c.width == 0 || c.height == 0) throw std::invalid_argument("synthetic: image size must be positive");
  if (c.n_train == 0) throw std::invalid_argument("synthetic: n_train must be positive");
  if (!(c.noise_sigma >= 0.0) || !(c.size_skew >= 0.0) || !(c.jitter >= 0.0)) {
    throw std::invalid_argument("synthetic: noise_sigma, size_skew and jitter must be non-negative");
  }
  if (c.max_attempts == 0) throw std::invalid_argument("synthetic: max_attempts must be positive");
  if (c.width * c.height < c.n_classes) throw std::invalid_argument("synthetic: fewer pixels than classes");
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  validate(config);
  for (unsigned attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(derive_seed(config.seed, attempt));
    std::vector<Site> base(config.n_classes);
    for (auto& s : base) {
      s.x = rng.uniform() * static_cast<double>(config.width);
      s.y = rng.uniform() * static_cast<double>(config.height);
      s.weight = std::exp(config.size_skew * rng.normal());
    }
    SyntheticDataset ds{config, attempt, {}, {}};
    std::vector<bool> seen(config.n_classes, false);
    for (std::size_t n = 0; n < config.n_train; ++n) {
      ds.train.push_back(make_image(base, config, rng));
      for (const auto l : ds.train.back().labels.labels()) seen[l] = true;
    }
    bool covered = true;
    for (const bool s : seen) covered = covered && s;
    if (!covered) continue;
    for (std::size_t n = 0; n < config.n_val; ++n) ds.val.push_back(make_image(base, config, rng));
    return ds;
  }
  throw std::runtime_error("synthetic: no layout covering all " + std::to_string(config.n_classes) +
                           " classes within " + std::to_string(config.max_attempts) + " attempts");
}

}  // namespace compactseg
