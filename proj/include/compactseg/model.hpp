#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compactseg/codebook.hpp"
#include "compactseg/loss.hpp"

namespace compactseg {

enum class HeadKind { OneHot, Binary, Hamming, Tree };

std::string_view to_string(HeadKind head);
HeadKind parse_head(std::string_view name);
// Encoding the head is trained against (OneHot uses none but reports Vanilla).
Scheme head_scheme(HeadKind head);
// Output channels: N_C, N_B, N_H and N_B respectively.
unsigned head_channels(HeadKind head, unsigned n_classes);

// Fixed network: pointwise layer (features -> hidden, tanh), 3x3 convolution
// with zero padding (hidden -> hidden, tanh), then a 1x1 head. Every head is a
// bank of (hidden + 1)-vectors, the last entry being the bias:
//   OneHot  N_C vectors, softmax
//   Binary  N_B vectors, sigmoid
//   Hamming N_H vectors, sigmoid
//   Tree    2^N_B - 1 vectors; channel k owns 2^k of them, indexed by the
//           integer formed from bits 0..k-1 (LSB-first), sigmoid.
struct Architecture {
  std::size_t n_features = 0;
  std::size_t hidden = 16;
  HeadKind head = HeadKind::OneHot;
  unsigned n_classes = 2;

  unsigned n_channels() const { return head_channels(head, n_classes); }
  std::size_t n_head_vectors() const;
  // First head vector of tree channel k.
  static std::size_t tree_bank_offset(unsigned k) { return (std::size_t{1} << k) - 1; }
  std::size_t n_params() const;
  bool operator==(const Architecture&) const = default;
};

struct ImageView {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t n_features = 0;
  std::span<const float> features;  // pixel-major

  std::size_t pixels() const { return width * height; }
};

// Per-image training targets. bits is channel-major (n_channels x pixels) and
// unused for the one-hot head.
struct ImageTargets {
  std::span<const std::uint16_t> labels;
  std::span<const std::uint8_t> bits;
};

struct ObjectiveSettings {
  BinaryLossOptions binary;  // binary heads
  bool onehot_dice = true;   // one-hot head: Dice + CE, or CE alone
};

class ToyModel {
 public:
  ToyModel(Architecture arch, std::uint64_t seed);
  ToyModel(Architecture arch, std::vector<double> params);

  const Architecture& arch() const { return arch_; }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  // Channel-major probabilities (n_channels x pixels). For the tree head,
  // teacher_bits (channel-major) choose the weight vectors; when empty the
  // channels are predicted in order, thresholding each at 0.5 to select the
  // next channel's weights. tree_bits, if given, receives the selected bits.
  std::vector<double> forward(const ImageView& image, std::span<const std::uint8_t> teacher_bits = {},
                              std::vector<std::uint8_t>* tree_bits = nullptr) const;

  // Training objective for one image (tree head in teacher-forcing mode) and
  // scale * gradient accumulated into grad.
  double objective(const ImageView& image, const ImageTargets& targets, const ObjectiveSettings& settings,
                   std::span<double> grad, double scale = 1.0) const;

  // Objective value only.
  double objective_value(const ImageView& image, const ImageTargets& targets, const ObjectiveSettings& settings) const;

 private:
  Architecture arch_;
  std::vector<double> params_;
};

inline constexpr int kModelFormatVersion = 1;
void save_model(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_model(const std::filesystem::path& path);

}  // namespace compactseg
