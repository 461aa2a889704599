#include "compactseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "compactseg/codebook.hpp"
#include "compactseg/loss.hpp"
#include "compactseg/model.hpp"
#include "compactseg/rng.hpp"
#include "compactseg/train.hpp"

namespace compactseg {

namespace {

using Objective = std::function<double(const std::vector<double>&)>;

GradcheckResult compare(std::string name, const Objective& f, std::vector<double> x,
                        const std::vector<double>& analytic, double step, double tolerance) {
  GradcheckResult r{std::move(name), 0.0, tolerance, x.size()};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(analytic[i] - numeric) / denom);
  }
  return r;
}

// Probabilities kept away from the clamp so the loss is smooth around them.
std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& v : p) v = 0.05 + 0.9 * rng.uniform();
  return p;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed, double step) {
  constexpr std::size_t kClasses = 5, kVoxels = 16;
  Rng rng(seed);
  std::vector<GradcheckResult> out;

  std::vector<std::uint16_t> labels(kVoxels);
  for (std::size_t i = 0; i < kVoxels; ++i) labels[i] = static_cast<std::uint16_t>(i % kClasses);
  rng.shuffle(std::span<std::uint16_t>(labels));
  const std::vector<double> target = one_hot(labels, kClasses);

  {
    const auto x = random_probs(rng, kClasses * kVoxels);
    const auto f = [&](const std::vector<double>& p) {
      return dice_loss({p, kClasses, kVoxels}, {target, kClasses, kVoxels}).value;
    };
    out.push_back(compare("loss/dice", f, x, dice_loss({x, kClasses, kVoxels}, {target, kClasses, kVoxels}).gradient,
                          step, kLossTolerance));
  }
  {
    const auto x = random_probs(rng, kClasses * kVoxels);
    std::vector<double> weights(kClasses);
    for (auto& w : weights) w = 0.5 + rng.uniform();
    const auto f = [&](const std::vector<double>& p) {
      return cross_entropy_loss({p, kClasses, kVoxels}, labels, weights).value;
    };
    out.push_back(compare("loss/weighted_ce", f, x,
                          cross_entropy_loss({x, kClasses, kVoxels}, labels, weights).gradient, step, kLossTolerance));
  }
  {
    constexpr std::size_t kBits = 3;
    std::vector<double> bits(kBits * kVoxels);
    for (auto& b : bits) b = rng.bernoulli(0.4) ? 1.0 : 0.0;
    const std::vector<double> weights = inverse_frequency_bit_weights({bits, kBits, kVoxels});
    for (const bool weighted : {false, true}) {
      BinaryLossOptions opts;
      if (weighted) opts.bit_weights = weights;
      const auto x = random_probs(rng, kBits * kVoxels);
      const auto f = [&](const std::vector<double>& p) {
        return binary_dice_ce_loss({p, kBits, kVoxels}, {bits, kBits, kVoxels}, opts).value;
      };
      out.push_back(compare(weighted ? "loss/binary_dice_ce_weighted" : "loss/binary_dice_ce", f, x,
                            binary_dice_ce_loss({x, kBits, kVoxels}, {bits, kBits, kVoxels}, opts).gradient, step,
                            kLossTolerance));
    }
  }

  std::vector<float> features(kVoxels * kClasses);
  for (auto& v : features) v = static_cast<float>(rng.normal());
  const ImageView image{4, 4, kClasses, features};
  for (const HeadKind head : {HeadKind::OneHot, HeadKind::Binary, HeadKind::Hamming, HeadKind::Tree}) {
    Architecture arch;
    arch.n_features = kClasses;
    arch.hidden = 4;
    arch.head = head;
    arch.n_classes = kClasses;
    const ToyModel model(arch, derive_seed(seed, static_cast<std::uint64_t>(head) + 1));
    std::vector<std::uint8_t> bits;
    if (head != HeadKind::OneHot) {
      bits = image_bits(build_random_codebook(kClasses, head_scheme(head), seed), labels);
    }
    const ImageTargets targets{labels, bits};
    const ObjectiveSettings settings;
    std::vector<double> grad(arch.n_params(), 0.0);
    model.objective(image, targets, settings, grad);
    const auto f = [&](const std::vector<double>& params) {
      return ToyModel(arch, params).objective_value(image, targets, settings);
    };
    out.push_back(compare("head/" + std::string(to_string(head)), f,
                          std::vector<double>(model.params().begin(), model.params().end()), grad, step,
                          kEndToEndTolerance));
  }
  return out;
}

}  // namespace compactseg
