#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace compactseg {

inline constexpr double kDiceSmoothing = 1e-5;
// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-7;

// Read-only channel-major matrix: element (c, i) is values[c * n_voxels + i].
struct ChannelMatrix {
  std::span<const double> values;
  std::size_t n_channels = 0;
  std::size_t n_voxels = 0;

  double operator()(std::size_t c, std::size_t i) const { return values[c * n_voxels + i]; }
};

// Loss value and its gradient w.r.t. the predictions (same layout).
struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;
};

// Soft multi-class Dice, averaged over channels:
//   1/C sum_c [1 - (2 sum_i p g + s) / (sum_i p + sum_i g + s)]
LossResult dice_loss(ChannelMatrix predictions, ChannelMatrix targets, double smoothing = kDiceSmoothing);

// Weight-normalised cross-entropy sum_i -w[g_i] log p[g_i, i] / sum_i w[g_i].
// Empty class_weights means unit weights.
LossResult cross_entropy_loss(ChannelMatrix predictions, std::span<const std::uint16_t> labels,
                              std::span<const double> class_weights = {});

// Dice + CE for a one-hot head.
LossResult dice_ce_loss(ChannelMatrix predictions, std::span<const std::uint16_t> labels,
                        std::span<const double> class_weights = {}, double smoothing = kDiceSmoothing);

struct BinaryLossOptions {
  double smoothing = kDiceSmoothing;
  bool include_dice = true;
  // Optional per-channel class weights laid out as {w0_0, w1_0, w0_1, w1_1, ...}:
  // the weight of target value 0 and 1 for each channel. Empty means unit weights.
  std::span<const double> bit_weights = {};
};

// Per channel: two-class Dice over {p, 1-p} plus two-class CE, averaged over
// channels. Targets must be 0 or 1.
LossResult binary_dice_ce_loss(ChannelMatrix bit_predictions, ChannelMatrix bit_targets,
                               const BinaryLossOptions& options = {});

// Balanced weights per channel: w_b = N / (2 * count(target == b)), with counts
// floored at 1. Layout as in BinaryLossOptions::bit_weights.
std::vector<double> inverse_frequency_bit_weights(ChannelMatrix bit_targets);

std::vector<double> one_hot(std::span<const std::uint16_t> labels, std::size_t n_classes);

}  // namespace compactseg
