#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace compactseg {

struct Dims {
  std::size_t x = 1;
  std::size_t y = 1;
  std::size_t z = 1;

  std::size_t voxels() const { return x * y * z; }
  // x-fastest linear index
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + x * (j + y * k); }
  bool operator==(const Dims&) const = default;
  std::string str() const;
};

// One class label per voxel, x-fastest.
class LabelVolume {
 public:
  LabelVolume() = default;
  explicit LabelVolume(Dims dims, std::uint16_t fill = 0);
  LabelVolume(Dims dims, std::vector<std::uint16_t> labels);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return labels_.size(); }
  std::span<const std::uint16_t> labels() const { return labels_; }
  std::span<std::uint16_t> labels() { return labels_; }
  std::uint16_t operator[](std::size_t v) const { return labels_[v]; }
  std::uint16_t& operator[](std::size_t v) { return labels_[v]; }
  std::uint16_t at(std::size_t i, std::size_t j, std::size_t k) const { return labels_[dims_.index(i, j, k)]; }
  std::uint16_t& at(std::size_t i, std::size_t j, std::size_t k) { return labels_[dims_.index(i, j, k)]; }

  bool operator==(const LabelVolume&) const = default;

 private:
  Dims dims_;
  std::vector<std::uint16_t> labels_;
};

// n_channels planes of dims.voxels() values each (channel-major, x-fastest
// within a plane).
template <typename T>
class PlanarVolume {
 public:
  PlanarVolume() = default;
  PlanarVolume(Dims dims, std::size_t n_channels, T fill = T{})
      : dims_(dims), n_channels_(n_channels), values_(dims.voxels() * n_channels, fill) {
    check_shape();
  }
  PlanarVolume(Dims dims, std::size_t n_channels, std::vector<T> values)
      : dims_(dims), n_channels_(n_channels), values_(std::move(values)) {
    check_shape();
    if (values_.size() != dims_.voxels() * n_channels_) {
      throw std::invalid_argument("volume holds " + std::to_string(values_.size()) + " values, expected " +
                                  std::to_string(dims_.voxels() * n_channels_));
    }
  }

  const Dims& dims() const { return dims_; }
  std::size_t n_channels() const { return n_channels_; }
  std::size_t n_voxels() const { return dims_.voxels(); }
  std::span<const T> values() const { return values_; }
  std::span<T> values() { return values_; }
  std::span<const T> channel(std::size_t c) const { return std::span(values_).subspan(c * n_voxels(), n_voxels()); }
  std::span<T> channel(std::size_t c) { return std::span(values_).subspan(c * n_voxels(), n_voxels()); }
  T at(std::size_t c, std::size_t v) const { return values_[c * n_voxels() + v]; }
  T& at(std::size_t c, std::size_t v) { return values_[c * n_voxels() + v]; }

  bool operator==(const PlanarVolume&) const = default;

 private:
  void check_shape() const {
    if (dims_.voxels() == 0 || n_channels_ == 0) throw std::invalid_argument("volume dims and channels must be positive");
  }

  Dims dims_;
  std::size_t n_channels_ = 0;
  std::vector<T> values_;
};

using ProbVolume = PlanarVolume<float>;
using BitVolume = PlanarVolume<std::uint8_t>;

// Throws std::invalid_argument unless every value lies in [0, 1].
void check_probabilities(const ProbVolume& probs);

ProbVolume to_probabilities(const BitVolume& bits);

// Raw little-endian payload plus a JSON sidecar at <path>.json describing dims,
// dtype, ordering and format version.
inline constexpr int kVolumeFormatVersion = 1;
std::filesystem::path sidecar_path(const std::filesystem::path& raw);

void save_label_volume(const LabelVolume& volume, const std::filesystem::path& path);
LabelVolume load_label_volume(const std::filesystem::path& path);
void save_prob_volume(const ProbVolume& volume, const std::filesystem::path& path);
ProbVolume load_prob_volume(const std::filesystem::path& path);

}  // namespace compactseg
