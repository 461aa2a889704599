#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <algorithm>
#include <map>

#include "compactseg/decode.hpp"
#include "compactseg/gradcheck.hpp"
#include "compactseg/rng.hpp"
#include "compactseg/train.hpp"

namespace compactseg {

void PrintTo(HeadKind head, std::ostream* os) { *os << to_string(head); }

namespace {

// Tiny noiseless problem: evidence is exactly one-hot, so every head can fit it.
RunConfig separable(HeadKind head) {
  RunConfig c;
  c.dataset.n_classes = 4;
  c.dataset.width = 12;
  c.dataset.height = 12;
  c.dataset.n_train = 4;
  c.dataset.n_val = 2;
  c.dataset.noise_sigma = 0.0;
  c.dataset.blur_radius = 0;
  c.dataset.seed = 3;
  c.model.head = head;
  c.model.hidden = 8;
  c.optimizer.learning_rate = 0.5;
  c.optimizer.epochs = 120;
  c.optimizer.batch_size = 1;
  return c;
}

TEST(RunConfigJson, DefaultsFillMissingKeys) {
  const RunConfig c = parse_run_config(R"({"model": {"head": "tree"}})");
  EXPECT_EQ(c.model.head, HeadKind::Tree);
  EXPECT_EQ(c.dataset.n_classes, SyntheticConfig{}.n_classes);
  EXPECT_EQ(c.optimizer.epochs, OptimizerConfig{}.epochs);
}

TEST(RunConfigJson, CanonicalFormRoundTrips) {
  RunConfig c = separable(HeadKind::Hamming);
  c.codebook.source = "random";
  c.codebook.seed = 17;
  c.loss.weighted_bce = true;
  c.eval.decode_mode = DecodeMode::Soft;
  const std::string text = run_config_to_json(c);
  EXPECT_EQ(run_config_to_json(parse_run_config(text)), text);
}

TEST(RunConfigJson, RejectsUnknownKeys) {
  EXPECT_THROW(parse_run_config(R"({"optimizer": {"learning_rat": 0.1}})"), std::invalid_argument);
  EXPECT_THROW(parse_run_config(R"({"optimiser": {}})"), std::invalid_argument);
}

TEST(RunConfigJson, ReportsLineOfSyntaxError) {
  try {
    parse_run_config("{\n  \"model\": {\n    \"head\": onehot\n  }\n}");
    FAIL() << "expected a parse error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(RunConfigJson, RejectsInvalidValues) {
  EXPECT_THROW(parse_run_config(R"({"optimizer": {"learning_rate": -1}})"), std::invalid_argument);
  EXPECT_THROW(parse_run_config(R"({"codebook": {"source": "file"}})"), std::invalid_argument);
  EXPECT_THROW(parse_run_config(R"({"model": {"head": "quad"}})"), std::invalid_argument);
  EXPECT_THROW(parse_run_config(R"({"dataset": {"n_classes": "many"}})"), std::invalid_argument);
}

TEST(ResolveCodebook, FollowsHeadScheme) {
  RunConfig c = separable(HeadKind::OneHot);
  EXPECT_FALSE(resolve_codebook(c).has_value());
  c.model.head = HeadKind::Hamming;
  EXPECT_EQ(resolve_codebook(c)->scheme(), Scheme::Hamming74);
  c.model.head = HeadKind::Tree;
  c.codebook.source = "random";
  const auto cb = resolve_codebook(c);
  EXPECT_EQ(cb->scheme(), Scheme::Vanilla);
  EXPECT_EQ(*cb, build_random_codebook(4, Scheme::Vanilla, c.codebook.seed));
}

TEST(ChannelCount, DoublingClassesAddsOneBinaryChannel) {
  RunConfig c;
  c.model.head = HeadKind::Binary;
  c.dataset.n_classes = 54;
  EXPECT_EQ(architecture_for(c).n_channels(), 6u);
  c.dataset.n_classes = 108;
  EXPECT_EQ(architecture_for(c).n_channels(), 7u);
}

class SeparableRun : public ::testing::TestWithParam<HeadKind> {};

TEST_P(SeparableRun, ReachesNearPerfectDsc) {
  const RunConfig cfg = separable(GetParam());
  const auto ds = generate_synthetic(cfg.dataset);
  const auto cb = resolve_codebook(cfg);
  const TrainResult r = train(ToyModel(architecture_for(cfg), cfg.model.seed), ds, cb, cfg);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.log.size(), cfg.optimizer.epochs);
  EXPECT_GT(r.log.back().mean_dsc, 0.99);
  const EvalResult ev = evaluate(r.model, cb, ds.train, cfg.eval);
  EXPECT_GT(ev.report.cohort_mean, 0.99);
}

INSTANTIATE_TEST_SUITE_P(AllHeads, SeparableRun,
                         ::testing::Values(HeadKind::OneHot, HeadKind::Binary, HeadKind::Hamming, HeadKind::Tree),
                         [](const auto& info) { return std::string(to_string(info.param)); });

// The shipped benchmark config must at least make early progress with every head.
class StandardConfigRun : public ::testing::TestWithParam<HeadKind> {};

TEST_P(StandardConfigRun, LossDecreasesOverFirstEpochs) {
  RunConfig cfg = load_run_config(std::filesystem::path(COMPACTSEG_SOURCE_DIR) / "configs" / "standard.json");
  cfg.model.head = GetParam();
  cfg.optimizer.epochs = 5;
  const auto ds = generate_synthetic(cfg.dataset);
  const auto cb = resolve_codebook(cfg);
  const TrainResult r = train(ToyModel(architecture_for(cfg), cfg.model.seed), ds, cb, cfg);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.log.size(), 5u);
  for (std::size_t i = 1; i < r.log.size(); ++i)
    EXPECT_LT(r.log[i].loss, r.log[i - 1].loss) << "epoch " << r.log[i].epoch;
}

INSTANTIATE_TEST_SUITE_P(AllHeads, StandardConfigRun,
                         ::testing::Values(HeadKind::OneHot, HeadKind::Binary, HeadKind::Hamming, HeadKind::Tree),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(TreeHead, ConvergedModelGivesSameOutputsWithTeacherOrInferredBits) {
  const RunConfig cfg = separable(HeadKind::Tree);
  const auto ds = generate_synthetic(cfg.dataset);
  const auto cb = resolve_codebook(cfg);
  const TrainResult r = train(ToyModel(architecture_for(cfg), cfg.model.seed), ds, cb, cfg);
  const auto& img = ds.train[0];
  const auto truth_bits = image_bits(*cb, img.labels.labels());
  const ImageView view = view_of(img, cfg.dataset.n_classes);
  EXPECT_EQ(r.model.forward(view), r.model.forward(view, truth_bits));
}

TEST(Training, IsBitwiseDeterministic) {
  RunConfig cfg = separable(HeadKind::Binary);
  cfg.dataset.noise_sigma = 0.4;
  cfg.optimizer.epochs = 5;
  cfg.optimizer.batch_size = 2;
  const auto ds = generate_synthetic(cfg.dataset);
  const auto cb = resolve_codebook(cfg);
  const auto run = [&] {
    std::string log;
    train(ToyModel(architecture_for(cfg), cfg.model.seed), ds, cb, cfg,
          [&](const EpochRecord& e) { log += epoch_log_row(e) + "\n"; });
    return log;
  };
  const std::string first = run();
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, run());
}

TEST(Training, DivergenceReportsEpoch) {
  const RunConfig cfg = separable(HeadKind::Binary);
  auto ds = generate_synthetic(cfg.dataset);
  ds.train[1].features[7] = std::nanf("");
  const TrainResult r = train(ToyModel(architecture_for(cfg), 1), ds, resolve_codebook(cfg), cfg);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(*r.failed_epoch, 1u);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_FALSE(std::isfinite(r.log.back().loss));
}

TEST(Training, RejectsMismatchedCodebook) {
  const RunConfig cfg = separable(HeadKind::Binary);
  const auto ds = generate_synthetic(cfg.dataset);
  EXPECT_THROW(train(ToyModel(architecture_for(cfg), 1), ds, identity_codebook(4, Scheme::Hamming74), cfg),
               std::invalid_argument);
  EXPECT_THROW(train(ToyModel(architecture_for(cfg), 1), ds, std::nullopt, cfg), std::invalid_argument);
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  RunConfig cfg = separable(HeadKind::Hamming);
  cfg.dataset.n_val = 5;
  const auto ds = generate_synthetic(cfg.dataset);
  const auto cb = resolve_codebook(cfg);
  const ToyModel model(architecture_for(cfg), 4);
  EvalConfig one, four;
  four.threads = 4;
  const EvalResult a = evaluate(model, cb, ds.val, one), b = evaluate(model, cb, ds.val, four);
  EXPECT_EQ(a.report.cohort_mean, b.report.cohort_mean);
  EXPECT_EQ(a.boundary.on_boundary, b.boundary.on_boundary);
  EXPECT_EQ(a.boundary.misclassified, b.boundary.misclassified);
}

TEST(Evaluate, TreeHardDecodeUsesSequentialBits) {
  const RunConfig cfg = separable(HeadKind::Tree);
  const auto ds = generate_synthetic(cfg.dataset);
  const auto cb = resolve_codebook(cfg);
  const ToyModel model(architecture_for(cfg), 8);
  std::vector<std::uint8_t> bits;
  model.forward(view_of(ds.val[0], 4), {}, &bits);
  const LabelVolume expected = hard_decode_bits(BitVolume(ds.val[0].labels.dims(), 2, bits), *cb);
  const LabelVolume got = predict(model, cb, ds.val[0], DecodeMode::Hard);
  EXPECT_TRUE(std::ranges::equal(got.labels(), expected.labels()));
}

// Uniformly random predictions give |P| ~ N/C and |P and G| ~ g/C for a class
// of g voxels, so DSC ~ 2f / (1 + C f) with f = g/N.
TEST(Evaluate, RandomPredictionsSitAtChanceLevel) {
  SyntheticConfig sc;
  sc.n_classes = 6;
  sc.width = sc.height = 64;
  sc.n_train = 1;
  sc.n_val = 0;
  sc.seed = 12;
  const auto ds = generate_synthetic(sc);
  const LabelVolume& truth = ds.train[0].labels;
  const double n = static_cast<double>(truth.dims().voxels());
  std::map<unsigned, double> counts;
  for (auto l : truth.labels()) counts[l] += 1.0;
  double chance = 0.0;
  for (const auto& [c, g] : counts) chance += 2.0 * (g / n) / (6.0 * (g / n) + 1.0);
  chance /= static_cast<double>(counts.size());

  Rng rng(99);
  std::vector<std::vector<std::optional<double>>> per_case;
  for (int trial = 0; trial < 20; ++trial) {
    LabelVolume pred(truth.dims());
    for (std::size_t p = 0; p < pred.dims().voxels(); ++p) pred[p] = static_cast<std::uint16_t>(rng.below(6));
    per_case.push_back(case_dsc(pred, truth, 6));
  }
  EXPECT_NEAR(aggregate(per_case).cohort_mean, chance, 0.01);
}

TEST(EpochLog, HeaderAndRowsAgreeOnColumns) {
  EpochRecord r;
  r.epoch = 3;
  r.loss = 0.25;
  r.mean_dsc = 0.5;
  r.class_dsc = {1.0, std::nullopt, 0.5};
  r.boundary_fraction = 0.75;
  const auto count = [](const std::string& s) { return std::ranges::count(s, ','); };
  EXPECT_EQ(epoch_log_header(3), "epoch,loss,mean_dsc,dsc_0,dsc_1,dsc_2,boundary_fraction");
  EXPECT_EQ(count(epoch_log_row(r)), count(epoch_log_header(3)));
  EXPECT_EQ(epoch_log_row(r), "3,0.25,0.5,1,,0.5,0.75");
}

TEST(Comparison, JoinsOnClassAndSortsBySize) {
  const std::vector<StructureSizeRow> a = {{2, 5.0, 0.9}, {0, 50.0, 0.95}, {1, 10.0, 0.8}};
  const std::vector<StructureSizeRow> b = {{0, 50.0, 0.9}, {1, 10.0, 0.4}};
  const auto rows = compare_structure_sizes(a, b);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].class_index, 1u);
  EXPECT_NEAR(rows[0].difference(), 0.4, 1e-12);
  EXPECT_EQ(rows[1].class_index, 0u);
}

TEST(Gradcheck, SuitePassesForAllLossesAndHeads) {
  const auto results = run_gradcheck();
  EXPECT_EQ(results.size(), 8u);
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed()) << r.name << " error " << r.max_relative_error;
    EXPECT_GT(r.n_checked, 0u);
  }
}

}  // namespace
}  // namespace compactseg
