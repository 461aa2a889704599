#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "compactseg/loss.hpp"
#include "compactseg/rng.hpp"
#include "oracles.hpp"

using namespace compactseg;

namespace {

constexpr double kStep = 1e-6;
constexpr double kLossTolerance = 1e-6;

std::vector<double> random_probs(std::size_t n, Rng& rng, double lo = 0.05, double hi = 0.95) {
  std::vector<double> p(n);
  for (auto& x : p) x = lo + (hi - lo) * rng.uniform();
  return p;
}

std::vector<std::uint16_t> random_labels(std::size_t n, unsigned classes, Rng& rng) {
  std::vector<std::uint16_t> l(n);
  for (auto& x : l) x = static_cast<std::uint16_t>(rng.below(classes));
  return l;
}

std::vector<double> random_bits(std::size_t n, Rng& rng) {
  std::vector<double> b(n);
  for (auto& x : b) x = static_cast<double>(rng.below(2));
  return b;
}

}  // namespace

TEST(DiceLoss, PerfectAndDisjointPredictions) {
  const std::vector<std::uint16_t> labels{0, 1, 2, 1, 0, 2};
  const auto t = one_hot(labels, 3);
  EXPECT_LT(dice_loss({t, 3, 6}, {t, 3, 6}).value, 1e-5);
  EXPECT_LT(dice_loss({t, 3, 6}, {t, 3, 6}, 1e-12).value, 1e-12);

  const std::vector<std::uint16_t> two{0, 1, 1, 0};
  const auto g = one_hot(two, 2);
  std::vector<double> inv(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) inv[i] = 1.0 - g[i];
  EXPECT_NEAR(dice_loss({inv, 2, 4}, {g, 2, 4}, 1e-12).value, 1.0, 1e-11);
}

TEST(DiceLoss, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  const auto labels = random_labels(4, 3, rng);
  const auto t = one_hot(labels, 3);
  const auto p = random_probs(12, rng);
  const auto f = [&](const std::vector<double>& x) { return dice_loss({x, 3, 4}, {t, 3, 4}).value; };
  const auto r = dice_loss({p, 3, 4}, {t, 3, 4});
  EXPECT_DOUBLE_EQ(r.value, f(p));
  EXPECT_LT(oracle::max_relative_error(r.gradient, oracle::central_gradient(f, p, kStep)), kLossTolerance);
}

TEST(DiceLoss, ShapeMismatch) {
  const std::vector<double> a(6, 0.5), b(8, 0.5);
  EXPECT_THROW(dice_loss({a, 2, 3}, {b, 2, 4}), std::invalid_argument);
  EXPECT_THROW(dice_loss({a, 2, 4}, {b, 2, 4}), std::invalid_argument);
}

TEST(DiceLoss, PerClassTermsStayInUnitInterval) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_probs(5, rng, 0.0, 1.0);
    const auto g = random_bits(5, rng);
    const double v = dice_loss({p, 1, 5}, {g, 1, 5}).value;
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(CrossEntropy, AnalyticValues) {
  std::vector<double> perfect{1.0, 0.0, 0.0, 1.0};
  const std::vector<std::uint16_t> labels{0, 1};
  EXPECT_LT(cross_entropy_loss({perfect, 2, 2}, labels).value, 1e-6);
  std::vector<double> uniform(4, 0.5);
  EXPECT_NEAR(cross_entropy_loss({uniform, 2, 2}, labels).value, std::numbers::ln2, 1e-12);
}

TEST(CrossEntropy, WeightedGradientMatchesFiniteDifferences) {
  Rng rng(3);
  const auto labels = random_labels(6, 4, rng);
  const auto p = random_probs(24, rng);
  const std::vector<double> w{0.5, 2.0, 1.3, 3.1};
  const auto f = [&](const std::vector<double>& x) { return cross_entropy_loss({x, 4, 6}, labels, w).value; };
  const auto r = cross_entropy_loss({p, 4, 6}, labels, w);
  EXPECT_LT(oracle::max_relative_error(r.gradient, oracle::central_gradient(f, p, kStep)), kLossTolerance);
}

TEST(CrossEntropy, InvariantToUniformWeightScaling) {
  Rng rng(4);
  const auto labels = random_labels(10, 3, rng);
  const auto p = random_probs(30, rng);
  const std::vector<double> w{0.7, 1.9, 0.2}, w10{7.0, 19.0, 2.0};
  EXPECT_NEAR(cross_entropy_loss({p, 3, 10}, labels, w).value, cross_entropy_loss({p, 3, 10}, labels, w10).value,
              1e-14);
}

TEST(CrossEntropy, RejectsBadInput) {
  const std::vector<double> p(4, 0.5);
  EXPECT_THROW(cross_entropy_loss({p, 2, 2}, std::vector<std::uint16_t>{0}), std::invalid_argument);
  EXPECT_THROW(cross_entropy_loss({p, 2, 2}, std::vector<std::uint16_t>{0, 2}), std::invalid_argument);
  EXPECT_THROW(cross_entropy_loss({p, 2, 2}, std::vector<std::uint16_t>{0, 1}, std::vector<double>{1.0, 0.0}),
               std::invalid_argument);
}

TEST(DiceCe, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const auto labels = random_labels(8, 5, rng);
  const auto p = random_probs(40, rng);
  const auto f = [&](const std::vector<double>& x) { return dice_ce_loss({x, 5, 8}, labels).value; };
  const auto r = dice_ce_loss({p, 5, 8}, labels);
  EXPECT_LT(oracle::max_relative_error(r.gradient, oracle::central_gradient(f, p, kStep)), kLossTolerance);
}

TEST(BinaryDiceCe, AnalyticValues) {
  const std::vector<double> ones(6, 1.0), half(6, 0.5);
  BinaryLossOptions ce_only;
  ce_only.include_dice = false;
  EXPECT_NEAR(binary_dice_ce_loss({half, 1, 6}, {ones, 1, 6}, ce_only).value, std::numbers::ln2, 1e-12);

  Rng rng(6);
  const auto g = random_bits(21, rng);
  const double crisp = binary_dice_ce_loss({g, 3, 7}, {g, 3, 7}).value;
  EXPECT_LT(crisp, 1e-5);
  EXPECT_GE(crisp, 0.0);
}

TEST(BinaryDiceCe, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const auto g = random_bits(7 * 6, rng);
  const auto p = random_probs(7 * 6, rng);
  const auto weights = inverse_frequency_bit_weights({g, 7, 6});
  for (bool dice : {true, false}) {
    for (bool weighted : {false, true}) {
      BinaryLossOptions opt;
      opt.include_dice = dice;
      if (weighted) opt.bit_weights = weights;
      const auto f = [&](const std::vector<double>& x) { return binary_dice_ce_loss({x, 7, 6}, {g, 7, 6}, opt).value; };
      const auto r = binary_dice_ce_loss({p, 7, 6}, {g, 7, 6}, opt);
      EXPECT_LT(oracle::max_relative_error(r.gradient, oracle::central_gradient(f, p, kStep)), kLossTolerance)
          << "dice " << dice << " weighted " << weighted;
    }
  }
}

TEST(BinaryDiceCe, RejectsNonBinaryTargets) {
  const std::vector<double> p(4, 0.5), g{0, 1, 0.5, 1};
  EXPECT_THROW(binary_dice_ce_loss({p, 1, 4}, {g, 1, 4}), std::invalid_argument);
}

TEST(BinaryWeights, InverseFrequency) {
  const std::vector<double> g{1, 0, 0, 0, 1, 1, 1, 1};
  const auto w = inverse_frequency_bit_weights({g, 2, 4});
  EXPECT_DOUBLE_EQ(w[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(w[1], 4.0 / 2.0);
  EXPECT_DOUBLE_EQ(w[2], 4.0 / 2.0);  // no zeros: count floored at 1
  EXPECT_DOUBLE_EQ(w[3], 4.0 / 8.0);
}

// Property: shuffling voxels consistently leaves every loss unchanged.
TEST(Losses, PermutationEquivariantInVoxels) {
  Rng rng(9);
  const std::size_t n = 16;
  const auto labels = random_labels(n, 4, rng);
  const auto p = random_probs(4 * n, rng);
  const auto g = random_bits(3 * n, rng);
  const auto q = random_probs(3 * n, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(std::span(perm));
  std::vector<std::uint16_t> labels2(n);
  std::vector<double> p2(p.size()), g2(g.size()), q2(q.size());
  for (std::size_t i = 0; i < n; ++i) {
    labels2[i] = labels[perm[i]];
    for (std::size_t c = 0; c < 4; ++c) p2[c * n + i] = p[c * n + perm[i]];
    for (std::size_t c = 0; c < 3; ++c) {
      g2[c * n + i] = g[c * n + perm[i]];
      q2[c * n + i] = q[c * n + perm[i]];
    }
  }
  EXPECT_NEAR(dice_ce_loss({p, 4, n}, labels).value, dice_ce_loss({p2, 4, n}, labels2).value, 1e-13);
  EXPECT_NEAR(binary_dice_ce_loss({q, 3, n}, {g, 3, n}).value, binary_dice_ce_loss({q2, 3, n}, {g2, 3, n}).value,
              1e-13);
}
