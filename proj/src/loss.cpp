#include "compactseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace compactseg {

namespace {

void check_matrix(const ChannelMatrix& m, const char* what) {
  if (m.values.size() != m.n_channels * m.n_voxels || m.n_voxels == 0 || m.n_channels == 0) {
    throw std::invalid_argument(std::string(what) + ": matrix size does not match its shape");
  }
}

void check_same_shape(const ChannelMatrix& a, const ChannelMatrix& b, const char* what) {
  check_matrix(a, what);
  check_matrix(b, what);
  if (a.n_channels != b.n_channels || a.n_voxels != b.n_voxels) {
    throw std::invalid_argument(std::string(what) + ": predictions are " + std::to_string(a.n_channels) + "x" +
                                std::to_string(a.n_voxels) + ", targets " + std::to_string(b.n_channels) + "x" +
                                std::to_string(b.n_voxels));
  }
}

bool unclamped(double p) { return p > kProbClamp && p < 1.0 - kProbClamp; }
double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// 1 - (2I + s)/(D + s) for one channel and d/dp of it, written into grad with
// the given sign (the complement channel of a binary output enters with -1).
double dice_term(std::span<const double> p, std::span<const double> g, double smoothing, double scale,
                 std::span<double> grad) {
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] * g[i];
    sum_p += p[i];
    sum_g += g[i];
  }
  const double num = 2.0 * inter + smoothing;
  const double den = sum_p + sum_g + smoothing;
  for (std::size_t i = 0; i < p.size(); ++i) grad[i] += -scale * (2.0 * g[i] * den - num) / (den * den);
  return 1.0 - num / den;
}

}  // namespace

LossResult dice_loss(ChannelMatrix predictions, ChannelMatrix targets, double smoothing) {
  check_same_shape(predictions, targets, "dice_loss");
  if (!(smoothing > 0.0)) throw std::invalid_argument("dice_loss: smoothing must be positive");
  const std::size_t n = predictions.n_voxels;
  const double scale = 1.0 / static_cast<double>(predictions.n_channels);
  LossResult r{0.0, std::vector<double>(predictions.values.size(), 0.0)};
  for (std::size_t c = 0; c < predictions.n_channels; ++c) {
    r.value += scale * dice_term(predictions.values.subspan(c * n, n), targets.values.subspan(c * n, n), smoothing,
                                 scale, std::span(r.gradient).subspan(c * n, n));
  }
  return r;
}

LossResult cross_entropy_loss(ChannelMatrix predictions, std::span<const std::uint16_t> labels,
                              std::span<const double> class_weights) {
  check_matrix(predictions, "cross_entropy_loss");
  if (labels.size() != predictions.n_voxels) {
    throw std::invalid_argument("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(predictions.n_voxels) + " voxels");
  }
  if (!class_weights.empty() && class_weights.size() != predictions.n_channels) {
    throw std::invalid_argument("cross_entropy_loss: need one weight per class");
  }
  for (const double w : class_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("cross_entropy_loss: class weights must be positive");
  }
  const std::size_t n = predictions.n_voxels;
  auto weight = [&](std::uint16_t g) { return class_weights.empty() ? 1.0 : class_weights[g]; };
  double total_weight = 0.0;
  for (const auto g : labels) {
    if (g >= predictions.n_channels) throw std::invalid_argument("cross_entropy_loss: label out of range");
    total_weight += weight(g);
  }
  LossResult r{0.0, std::vector<double>(predictions.values.size(), 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = labels[i];
    const double p = predictions(g, i);
    const double w = weight(g) / total_weight;
    r.value -= w * std::log(clamp_prob(p));
    if (unclamped(p)) r.gradient[g * n + i] = -w / p;
  }
  return r;
}

LossResult dice_ce_loss(ChannelMatrix predictions, std::span<const std::uint16_t> labels,
                        std::span<const double> class_weights, double smoothing) {
  const std::vector<double> targets = one_hot(labels, predictions.n_channels);
  LossResult dice = dice_loss(predictions, {targets, predictions.n_channels, labels.size()}, smoothing);
  const LossResult ce = cross_entropy_loss(predictions, labels, class_weights);
  dice.value += ce.value;
  for (std::size_t i = 0; i < dice.gradient.size(); ++i) dice.gradient[i] += ce.gradient[i];
  return dice;
}

LossResult binary_dice_ce_loss(ChannelMatrix bit_predictions, ChannelMatrix bit_targets,
                               const BinaryLossOptions& options) {
  check_same_shape(bit_predictions, bit_targets, "binary_dice_ce_loss");
  const std::size_t k_bits = bit_predictions.n_channels;
  const std::size_t n = bit_predictions.n_voxels;
  if (!options.bit_weights.empty() && options.bit_weights.size() != 2 * k_bits) {
    throw std::invalid_argument("binary_dice_ce_loss: need two weights per channel");
  }
  for (const double w : options.bit_weights) {
    if (!(w > 0.0)) throw std::invalid_argument("binary_dice_ce_loss: weights must be positive");
  }
  for (const double g : bit_targets.values) {
    if (g != 0.0 && g != 1.0) throw std::invalid_argument("binary_dice_ce_loss: targets must be 0 or 1");
  }
  const double scale = 1.0 / static_cast<double>(k_bits);
  LossResult r{0.0, std::vector<double>(bit_predictions.values.size(), 0.0)};
  std::vector<double> comp_p(n), comp_g(n), comp_grad(n);
  for (std::size_t k = 0; k < k_bits; ++k) {
    const auto p = bit_predictions.values.subspan(k * n, n);
    const auto g = bit_targets.values.subspan(k * n, n);
    auto grad = std::span(r.gradient).subspan(k * n, n);
    double channel = 0.0;
    if (options.include_dice) {
      for (std::size_t i = 0; i < n; ++i) {
        comp_p[i] = 1.0 - p[i];
        comp_g[i] = 1.0 - g[i];
      }
      std::fill(comp_grad.begin(), comp_grad.end(), 0.0);
      // two-class Dice: mean over the foreground and background maps
      channel += 0.5 * dice_term(p, g, options.smoothing, 0.5 * scale, grad);
      channel += 0.5 * dice_term(comp_p, comp_g, options.smoothing, 0.5 * scale, comp_grad);
      for (std::size_t i = 0; i < n; ++i) grad[i] -= comp_grad[i];
    }
    const double w0 = options.bit_weights.empty() ? 1.0 : options.bit_weights[2 * k];
    const double w1 = options.bit_weights.empty() ? 1.0 : options.bit_weights[2 * k + 1];
    double total_weight = 0.0;
    for (std::size_t i = 0; i < n; ++i) total_weight += g[i] != 0.0 ? w1 : w0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool one = g[i] != 0.0;
      const double w = (one ? w1 : w0) / total_weight;
      const double q = one ? p[i] : 1.0 - p[i];
      channel -= w * std::log(clamp_prob(q));
      if (unclamped(q)) grad[i] += scale * (one ? -w / q : w / q);
    }
    r.value += scale * channel;
  }
  return r;
}

std::vector<double> inverse_frequency_bit_weights(ChannelMatrix bit_targets) {
  check_matrix(bit_targets, "inverse_frequency_bit_weights");
  const std::size_t n = bit_targets.n_voxels;
  std::vector<double> weights(2 * bit_targets.n_channels);
  for (std::size_t k = 0; k < bit_targets.n_channels; ++k) {
    double ones = 0.0;
    for (std::size_t i = 0; i < n; ++i) ones += bit_targets(k, i) != 0.0 ? 1.0 : 0.0;
    const double zeros = static_cast<double>(n) - ones;
    weights[2 * k] = static_cast<double>(n) / (2.0 * std::max(zeros, 1.0));
    weights[2 * k + 1] = static_cast<double>(n) / (2.0 * std::max(ones, 1.0));
  }
  return weights;
}

std::vector<double> one_hot(std::span<const std::uint16_t> labels, std::size_t n_classes) {
  std::vector<double> out(n_classes * labels.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) throw std::invalid_argument("one_hot: label out of range");
    out[labels[i] * labels.size() + i] = 1.0;
  }
  return out;
}

}  // namespace compactseg
