#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "compactseg/io.hpp"
#include "compactseg/rng.hpp"
#include "compactseg/volume.hpp"
#include "json.hpp"

using namespace compactseg;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "compactseg_volume_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Volume, IndexingIsXFastest) {
  LabelVolume v(Dims{3, 2, 2});
  v.at(2, 1, 1) = 9;
  EXPECT_EQ(v[2 + 3 * (1 + 2 * 1)], 9);
  ProbVolume p(Dims{3, 2, 2}, 4);
  p.at(3, 5) = 0.25f;
  EXPECT_EQ(p.values()[3 * 12 + 5], 0.25f);
  EXPECT_EQ(p.channel(3)[5], 0.25f);
}

TEST(Volume, ShapeValidation) {
  EXPECT_THROW(LabelVolume(Dims{2, 2, 1}, std::vector<std::uint16_t>(3)), std::invalid_argument);
  EXPECT_THROW(ProbVolume(Dims{2, 2, 1}, 2, std::vector<float>(7)), std::invalid_argument);
  EXPECT_THROW(ProbVolume(Dims{0, 2, 1}, 2), std::invalid_argument);
}

TEST(VolumeFile, LabelRoundTripAndByteLayout) {
  Rng rng(3);
  LabelVolume v(Dims{5, 4, 3});
  for (auto& l : v.labels()) l = static_cast<std::uint16_t>(rng.below(65536));
  v[0] = 0x1234;
  const auto path = temp_dir() / "labels.raw";
  save_label_volume(v, path);
  EXPECT_EQ(load_label_volume(path), v);
  EXPECT_EQ(std::filesystem::file_size(path), 2u * 60u);
  std::ifstream in(path, std::ios::binary);
  unsigned char first[2];
  in.read(reinterpret_cast<char*>(first), 2);
  EXPECT_EQ(first[0], 0x34);  // little endian
  EXPECT_EQ(first[1], 0x12);
  const auto header = nlohmann::json::parse(read_text_file(sidecar_path(path)));
  EXPECT_EQ(header["dtype"], "uint16");
  EXPECT_EQ(header["ordering"], "x-fastest");
  EXPECT_EQ(header["format_version"], kVolumeFormatVersion);
}

TEST(VolumeFile, ProbRoundTripAndValidation) {
  Rng rng(4);
  ProbVolume p(Dims{4, 3, 2}, 5);
  for (auto& x : p.values()) x = static_cast<float>(rng.uniform());
  const auto path = temp_dir() / "probs.raw";
  save_prob_volume(p, path);
  EXPECT_EQ(load_prob_volume(path), p);

  p.values()[7] = 1.5f;
  save_prob_volume(p, path);
  EXPECT_THROW(load_prob_volume(path), std::invalid_argument);
}

TEST(VolumeFile, TruncatedPayloadAndWrongKindRejected) {
  const auto path = temp_dir() / "short.raw";
  save_label_volume(LabelVolume(Dims{4, 4, 1}), path);
  std::filesystem::resize_file(path, 20);
  EXPECT_THROW(load_label_volume(path), std::runtime_error);
  save_label_volume(LabelVolume(Dims{4, 4, 1}), path);
  EXPECT_THROW(load_prob_volume(path), std::runtime_error);
}
