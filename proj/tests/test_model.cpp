#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "compactseg/codebook.hpp"
#include "compactseg/model.hpp"
#include "compactseg/rng.hpp"
#include "oracles.hpp"

namespace compactseg {
namespace {

struct Fixture {
  std::size_t w = 4, h = 4, f = 3;
  std::vector<float> features;
  std::vector<std::uint16_t> labels;

  Fixture() {
    Rng rng(7);
    features.resize(w * h * f);
    for (auto& x : features) x = static_cast<float>(rng.normal());
    labels.resize(w * h);
    for (std::size_t p = 0; p < labels.size(); ++p) labels[p] = static_cast<std::uint16_t>(p % 5);
  }
  ImageView view() const { return {w, h, f, features}; }
};

std::vector<std::uint8_t> channel_major_bits(const Codebook& cb, std::span<const std::uint16_t> labels) {
  const unsigned k = cb.n_encoded_bits();
  std::vector<std::uint8_t> bits(k * labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const BitVector code = cb.encode(labels[p]);
    for (unsigned c = 0; c < k; ++c) bits[c * labels.size() + p] = code[c];
  }
  return bits;
}

Architecture arch_for(HeadKind head) {
  Architecture a;
  a.n_features = 3;
  a.hidden = 3;
  a.head = head;
  a.n_classes = 5;
  return a;
}

TEST(ModelShape, ChannelCountsForHundredEightClasses) {
  EXPECT_EQ(head_channels(HeadKind::OneHot, 108), 108u);
  EXPECT_EQ(head_channels(HeadKind::Binary, 108), 7u);
  EXPECT_EQ(head_channels(HeadKind::Hamming, 108), 14u);
  EXPECT_EQ(head_channels(HeadKind::Tree, 108), 7u);
}

TEST(ModelShape, TreeBankHoldsOneVectorPerPrefix) {
  Architecture a = arch_for(HeadKind::Tree);
  EXPECT_EQ(a.n_head_vectors(), 7u);
  EXPECT_EQ(Architecture::tree_bank_offset(0), 0u);
  EXPECT_EQ(Architecture::tree_bank_offset(1), 1u);
  EXPECT_EQ(Architecture::tree_bank_offset(2), 3u);
  // trunk: 3*3 + 3 + 9*3*3 + 3 = 96, head: 7 * 4
  EXPECT_EQ(a.n_params(), 96u + 28u);
}

TEST(ModelShape, ParseRejectsUnknownHead) {
  EXPECT_EQ(parse_head("tree"), HeadKind::Tree);
  EXPECT_THROW(parse_head("quad"), std::invalid_argument);
}

TEST(ModelForward, SoftmaxColumnsSumToOne) {
  const Fixture fx;
  const ToyModel model(arch_for(HeadKind::OneHot), 3);
  const auto probs = model.forward(fx.view());
  ASSERT_EQ(probs.size(), 5u * 16u);
  for (std::size_t p = 0; p < 16; ++p) {
    double s = 0.0;
    for (unsigned c = 0; c < 5; ++c) s += probs[c * 16 + p];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(ModelForward, SigmoidHeadsStayInUnitInterval) {
  const Fixture fx;
  for (HeadKind head : {HeadKind::Binary, HeadKind::Hamming, HeadKind::Tree}) {
    const ToyModel model(arch_for(head), 3);
    const auto probs = model.forward(fx.view());
    EXPECT_EQ(probs.size(), model.arch().n_channels() * 16u);
    for (double p : probs) {
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
    }
  }
}

TEST(ModelForward, TreeInferenceMatchesTeacherForcingOnItsOwnBits) {
  const Fixture fx;
  const ToyModel model(arch_for(HeadKind::Tree), 11);
  std::vector<std::uint8_t> bits;
  const auto free_run = model.forward(fx.view(), {}, &bits);
  const auto forced = model.forward(fx.view(), bits);
  EXPECT_EQ(free_run, forced);
  for (std::size_t i = 0; i < bits.size(); ++i) EXPECT_EQ(bits[i], free_run[i] >= 0.5 ? 1 : 0);
}

TEST(ModelForward, TreeSelectsWeightsByPrefix) {
  // Flipping the teacher's first bit must change later channels only.
  const Fixture fx;
  const ToyModel model(arch_for(HeadKind::Tree), 5);
  std::vector<std::uint8_t> teacher(3 * 16, 0);
  auto base = model.forward(fx.view(), teacher);
  teacher[0] = 1;  // pixel 0, channel 0
  auto flipped = model.forward(fx.view(), teacher);
  EXPECT_EQ(base[0], flipped[0]);
  EXPECT_NE(base[16], flipped[16]);
  EXPECT_EQ(base[17], flipped[17]);
}

TEST(ModelForward, RejectsWrongFeatureCount) {
  Fixture fx;
  const ToyModel model(arch_for(HeadKind::Binary), 3);
  ImageView bad = fx.view();
  bad.n_features = 2;
  EXPECT_THROW(model.forward(bad), std::invalid_argument);
}

TEST(ModelForward, SameSeedSameParameters) {
  const ToyModel a(arch_for(HeadKind::Hamming), 42), b(arch_for(HeadKind::Hamming), 42), c(arch_for(HeadKind::Hamming), 43);
  EXPECT_TRUE(std::ranges::equal(a.params(), b.params()));
  EXPECT_FALSE(std::ranges::equal(a.params(), c.params()));
}

void PrintTo(HeadKind head, std::ostream* os) { *os << to_string(head); }

class ModelGradient : public ::testing::TestWithParam<HeadKind> {};

TEST_P(ModelGradient, MatchesCentralDifferences) {
  const Fixture fx;
  const Architecture arch = arch_for(GetParam());
  const ToyModel model(arch, 21);
  const Codebook cb = build_random_codebook(5, head_scheme(arch.head), 4);
  const std::vector<std::uint8_t> bits = arch.head == HeadKind::OneHot ? std::vector<std::uint8_t>{}
                                                                       : channel_major_bits(cb, fx.labels);
  const ImageTargets targets{fx.labels, bits};
  ObjectiveSettings settings;
  std::vector<double> weights;
  if (arch.head != HeadKind::OneHot) {
    const std::vector<double> t(bits.begin(), bits.end());
    weights = inverse_frequency_bit_weights({t, arch.n_channels(), 16});
    settings.binary.bit_weights = weights;
  }

  std::vector<double> grad(arch.n_params(), 0.0);
  model.objective(fx.view(), targets, settings, grad);

  const std::vector<double> x0(model.params().begin(), model.params().end());
  const auto f = [&](const std::vector<double>& x) {
    return ToyModel(arch, x).objective_value(fx.view(), targets, settings);
  };
  const auto numeric = oracle::central_gradient(f, x0, 1e-6);
  EXPECT_LT(oracle::max_relative_error(grad, numeric), 1e-5);
}

TEST_P(ModelGradient, ScaleMultipliesAndAccumulates) {
  const Fixture fx;
  const Architecture arch = arch_for(GetParam());
  const ToyModel model(arch, 2);
  const Codebook cb = build_random_codebook(5, head_scheme(arch.head), 1);
  const auto bits = channel_major_bits(cb, fx.labels);
  const ImageTargets targets{fx.labels, arch.head == HeadKind::OneHot ? std::span<const std::uint8_t>{} : bits};
  std::vector<double> once(arch.n_params(), 0.0), twice(arch.n_params(), 0.0);
  model.objective(fx.view(), targets, {}, once, 2.0);
  model.objective(fx.view(), targets, {}, twice);
  model.objective(fx.view(), targets, {}, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(once[i], twice[i], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(AllHeads, ModelGradient,
                         ::testing::Values(HeadKind::OneHot, HeadKind::Binary, HeadKind::Hamming, HeadKind::Tree),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ModelIo, RoundTripsExactly) {
  const ToyModel model(arch_for(HeadKind::Tree), 9);
  const auto path = std::filesystem::temp_directory_path() / "compactseg_model_roundtrip.json";
  save_model(model, path);
  const ToyModel back = load_model(path);
  EXPECT_EQ(back.arch(), model.arch());
  EXPECT_TRUE(std::ranges::equal(back.params(), model.params()));
  std::filesystem::remove(path);
}

TEST(ModelIo, RejectsParameterCountMismatch) {
  EXPECT_THROW(ToyModel(arch_for(HeadKind::Binary), std::vector<double>(3, 0.0)), std::invalid_argument);
}

}  // namespace
}  // namespace compactseg
