#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "compactseg/codebook.hpp"
#include "compactseg/metrics.hpp"
#include "compactseg/model.hpp"
#include "compactseg/synthetic.hpp"

namespace compactseg {

enum class DecodeMode { Hard, Soft };
std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view name);

struct ModelConfig {
  HeadKind head = HeadKind::OneHot;
  std::size_t hidden = 16;
  std::uint64_t seed = 1;
};

// Where the class-to-word assignment of a binary head comes from. "identity"
// maps class c to word c, "random" shuffles with `seed`, "file" loads `path`.
struct CodebookConfig {
  std::string source = "identity";
  std::uint64_t seed = 1;
  std::string path;
};

struct LossConfig {
  bool dice = true;           // Dice term alongside CE
  bool weighted_bce = false;  // inverse-frequency weights on each bit channel
  double smoothing = kDiceSmoothing;
};

struct OptimizerConfig {
  double learning_rate = 0.5;
  unsigned epochs = 40;
  std::size_t batch_size = 4;
  std::uint64_t seed = 1;  // mini-batch order
};

struct EvalConfig {
  DecodeMode decode_mode = DecodeMode::Hard;
  bool include_background = true;
  unsigned threads = 1;
};

struct RunConfig {
  SyntheticConfig dataset;
  ModelConfig model;
  CodebookConfig codebook;
  LossConfig loss;
  OptimizerConfig optimizer;
  EvalConfig eval;
};

// JSON run configuration. Missing keys keep their defaults; unknown keys are
// rejected so typos do not silently fall back. Errors carry line context.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
// Canonical, fully resolved form (every key present).
std::string run_config_to_json(const RunConfig& config);
void validate(const RunConfig& config);

Architecture architecture_for(const RunConfig& config);
// Codebook of a binary head; nullopt for the one-hot head. Relative file
// paths resolve against base_dir.
std::optional<Codebook> resolve_codebook(const RunConfig& config, const std::filesystem::path& base_dir = {});

// Channel-major crisp bits (n_encoded_bits x pixels) of a label image.
std::vector<std::uint8_t> image_bits(const Codebook& codebook, std::span<const std::uint16_t> labels);

ImageView view_of(const SyntheticImage& image, std::size_t n_features);

// Decoded label prediction of one image. Tree heads infer sequentially, so
// their hard decode uses the bits chosen during the forward pass; soft decode
// works on the returned probabilities.
LabelVolume predict(const ToyModel& model, const std::optional<Codebook>& codebook, const SyntheticImage& image,
                    DecodeMode mode);

struct EvalResult {
  DscReport report;
  BoundaryCounts boundary;  // pooled over cases
  std::vector<StructureSizeRow> sizes;
  double voxel_accuracy = 0.0;
  std::vector<LabelVolume> predictions;
};

// Cases are processed in parallel blocks, aggregated in index order.
EvalResult evaluate(const ToyModel& model, const std::optional<Codebook>& codebook,
                    std::span<const SyntheticImage> images, const EvalConfig& config);

struct EpochRecord {
  unsigned epoch = 0;
  double loss = 0.0;  // mean per-image objective seen during the epoch
  double mean_dsc = 0.0;
  std::vector<std::optional<double>> class_dsc;  // mean over validation cases
  double boundary_fraction = 0.0;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochRecord> log;
  std::optional<unsigned> failed_epoch;  // set when the loss became non-finite

  bool ok() const { return !failed_epoch; }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Plain mini-batch gradient descent. Validation metrics use the validation
// split, or the training split when it is empty.
TrainResult train(ToyModel model, const SyntheticDataset& dataset, const std::optional<Codebook>& codebook,
                  const RunConfig& config, const EpochCallback& on_epoch = {});

// epoch,loss,mean_dsc,dsc_0..dsc_{C-1},boundary_fraction
std::string epoch_log_header(unsigned n_classes);
std::string epoch_log_row(const EpochRecord& record);

// class_id,mean_voxels,dsc_a,dsc_b,difference (a minus b), sorted by size.
struct ComparisonRow {
  unsigned class_index = 0;
  double mean_voxels = 0.0;
  double dsc_a = 0.0;
  double dsc_b = 0.0;
  double difference() const { return dsc_a - dsc_b; }
};
std::vector<ComparisonRow> compare_structure_sizes(std::span<const StructureSizeRow> a,
                                                   std::span<const StructureSizeRow> b);
void write_comparison_csv(std::span<const ComparisonRow> rows, std::string_view name_a, std::string_view name_b,
                          const std::filesystem::path& path);

}  // namespace compactseg
