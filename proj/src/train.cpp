#include "compactseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "compactseg/decode.hpp"
#include "compactseg/io.hpp"
#include "compactseg/rng.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace compactseg {

using nlohmann::json;

std::string_view to_string(DecodeMode mode) { return mode == DecodeMode::Hard ? "hard" : "soft"; }

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "hard") return DecodeMode::Hard;
  if (name == "soft") return DecodeMode::Soft;
  throw std::invalid_argument("unknown decode mode '" + std::string(name) + "' (expected hard or soft)");
}

namespace {

// Visits each key of a config section, rejecting keys the reader does not know.
template <typename Fn>
void read_section(const json& doc, const char* section, Fn&& fn) {
  if (!doc.contains(section)) return;
  const json& obj = doc.at(section);
  if (!obj.is_object()) throw std::invalid_argument(std::string("config: '") + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!fn(key, value)) throw std::invalid_argument(std::string("config: unknown key '") + section + "." + key + "'");
  }
}

template <typename T>
bool take(const std::string& key, const json& value, const char* name, T& out) {
  if (key != name) return false;
  out = value.get<T>();
  return true;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
  static const char* kSections[] = {"dataset", "model", "codebook", "loss", "optimizer", "eval"};
  for (const auto& [key, value] : doc.items()) {
    if (std::ranges::find(kSections, key) == std::end(kSections)) {
      throw std::invalid_argument("config: unknown section '" + key + "'");
    }
  }
  RunConfig c;
  try {
    read_section(doc, "dataset", [&](const std::string& k, const json& v) {
      auto& d = c.dataset;
      return take(k, v, "n_classes", d.n_classes) || take(k, v, "width", d.width) || take(k, v, "height", d.height) ||
             take(k, v, "n_train", d.n_train) || take(k, v, "n_val", d.n_val) ||
             take(k, v, "noise_sigma", d.noise_sigma) || take(k, v, "blur_radius", d.blur_radius) ||
             take(k, v, "size_skew", d.size_skew) || take(k, v, "jitter", d.jitter) || take(k, v, "seed", d.seed) ||
             take(k, v, "max_attempts", d.max_attempts);
    });
    read_section(doc, "model", [&](const std::string& k, const json& v) {
      if (k == "head") {
        c.model.head = parse_head(v.get<std::string>());
        return true;
      }
      return take(k, v, "hidden", c.model.hidden) || take(k, v, "seed", c.model.seed);
    });
    read_section(doc, "codebook", [&](const std::string& k, const json& v) {
      return take(k, v, "source", c.codebook.source) || take(k, v, "seed", c.codebook.seed) ||
             take(k, v, "path", c.codebook.path);
    });
    read_section(doc, "loss", [&](const std::string& k, const json& v) {
      return take(k, v, "dice", c.loss.dice) || take(k, v, "weighted_bce", c.loss.weighted_bce) ||
             take(k, v, "smoothing", c.loss.smoothing);
    });
    read_section(doc, "optimizer", [&](const std::string& k, const json& v) {
      auto& o = c.optimizer;
      return take(k, v, "learning_rate", o.learning_rate) || take(k, v, "epochs", o.epochs) ||
             take(k, v, "batch_size", o.batch_size) || take(k, v, "seed", o.seed);
    });
    read_section(doc, "eval", [&](const std::string& k, const json& v) {
      if (k == "decode_mode") {
        c.eval.decode_mode = parse_decode_mode(v.get<std::string>());
        return true;
      }
      return take(k, v, "include_background", c.eval.include_background) || take(k, v, "threads", c.eval.threads);
    });
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return parse_run_config(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  json doc = {
      {"dataset",
       {{"n_classes", d.n_classes},
        {"width", d.width},
        {"height", d.height},
        {"n_train", d.n_train},
        {"n_val", d.n_val},
        {"noise_sigma", d.noise_sigma},
        {"blur_radius", d.blur_radius},
        {"size_skew", d.size_skew},
        {"jitter", d.jitter},
        {"seed", d.seed},
        {"max_attempts", d.max_attempts}}},
      {"model", {{"head", std::string(to_string(c.model.head))}, {"hidden", c.model.hidden}, {"seed", c.model.seed}}},
      {"codebook", {{"source", c.codebook.source}, {"seed", c.codebook.seed}, {"path", c.codebook.path}}},
      {"loss", {{"dice", c.loss.dice}, {"weighted_bce", c.loss.weighted_bce}, {"smoothing", c.loss.smoothing}}},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"epochs", c.optimizer.epochs},
        {"batch_size", c.optimizer.batch_size},
        {"seed", c.optimizer.seed}}},
      {"eval",
       {{"decode_mode", std::string(to_string(c.eval.decode_mode))},
        {"include_background", c.eval.include_background},
        {"threads", c.eval.threads}}}};
  return doc.dump(2) + "\n";
}

void validate(const RunConfig& c) {
  validate(c.dataset);
  if (c.model.hidden == 0) throw std::invalid_argument("config: model.hidden must be positive");
  if (c.codebook.source != "identity" && c.codebook.source != "random" && c.codebook.source != "file") {
    throw std::invalid_argument("config: codebook.source must be identity, random or file");
  }
  if (c.codebook.source == "file" && c.codebook.path.empty()) {
    throw std::invalid_argument("config: codebook.source is file but codebook.path is empty");
  }
  if (!(c.loss.smoothing > 0.0)) throw std::invalid_argument("config: loss.smoothing must be positive");
  if (!(c.optimizer.learning_rate > 0.0) || !std::isfinite(c.optimizer.learning_rate)) {
    throw std::invalid_argument("config: optimizer.learning_rate must be positive");
  }
  if (c.optimizer.batch_size == 0) throw std::invalid_argument("config: optimizer.batch_size must be positive");
  if (c.eval.threads == 0) throw std::invalid_argument("config: eval.threads must be positive");
}

Architecture architecture_for(const RunConfig& config) {
  Architecture a;
  a.n_features = config.dataset.n_classes;
  a.hidden = config.model.hidden;
  a.head = config.model.head;
  a.n_classes = config.dataset.n_classes;
  return a;
}

std::optional<Codebook> resolve_codebook(const RunConfig& config, const std::filesystem::path& base_dir) {
  if (config.model.head == HeadKind::OneHot) return std::nullopt;
  const Scheme scheme = head_scheme(config.model.head);
  const unsigned n = config.dataset.n_classes;
  if (config.codebook.source == "identity") return identity_codebook(n, scheme);
  if (config.codebook.source == "random") return build_random_codebook(n, scheme, config.codebook.seed);
  std::filesystem::path path = config.codebook.path;
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  Codebook cb = load_codebook(path);
  if (cb.n_classes() != n || cb.scheme() != scheme) {
    throw std::invalid_argument(path.string() + ": codebook has " + std::to_string(cb.n_classes()) + " classes (" +
                                std::string(to_string(cb.scheme())) + "), run needs " + std::to_string(n) + " (" +
                                std::string(to_string(scheme)) + ")");
  }
  return cb;
}

std::vector<std::uint8_t> image_bits(const Codebook& codebook, std::span<const std::uint16_t> labels) {
  const unsigned k = codebook.n_encoded_bits();
  const std::size_t n = labels.size();
  std::vector<std::uint8_t> bits(k * n);
  std::vector<std::uint8_t> code(k);
  for (std::size_t p = 0; p < n; ++p) {
    codebook.encode_into(labels[p], code);
    for (unsigned c = 0; c < k; ++c) bits[c * n + p] = code[c];
  }
  return bits;
}

ImageView view_of(const SyntheticImage& image, std::size_t n_features) {
  const Dims& d = image.labels.dims();
  return {d.x, d.y, n_features, image.features};
}

LabelVolume predict(const ToyModel& model, const std::optional<Codebook>& codebook, const SyntheticImage& image,
                    DecodeMode mode) {
  const Architecture& arch = model.arch();
  const Dims dims = image.labels.dims();
  const std::size_t n = dims.voxels();
  std::vector<std::uint8_t> tree_bits;
  const std::vector<double> probs =
      model.forward(view_of(image, arch.n_features), {}, arch.head == HeadKind::Tree ? &tree_bits : nullptr);

  if (arch.head == HeadKind::OneHot) {
    LabelVolume out(dims);
    for (std::size_t p = 0; p < n; ++p) {
      unsigned best = 0;
      for (unsigned c = 1; c < arch.n_classes; ++c) {
        if (probs[c * n + p] > probs[best * n + p]) best = c;
      }
      out[p] = static_cast<std::uint16_t>(best);
    }
    return out;
  }
  if (!codebook) throw std::invalid_argument("predict: binary heads need a codebook");
  if (arch.head == HeadKind::Tree && mode == DecodeMode::Hard) {
    return hard_decode_bits(BitVolume(dims, arch.n_channels(), std::move(tree_bits)), *codebook);
  }
  ProbVolume pv(dims, arch.n_channels());
  std::ranges::transform(probs, pv.values().begin(), [](double p) { return static_cast<float>(p); });
  return mode == DecodeMode::Hard ? hard_decode(pv, *codebook) : soft_decode(pv, *codebook);
}

EvalResult evaluate(const ToyModel& model, const std::optional<Codebook>& codebook,
                    std::span<const SyntheticImage> images, const EvalConfig& config) {
  if (images.empty()) throw std::invalid_argument("evaluate: no images");
  const unsigned n_classes = model.arch().n_classes;
  EvalResult result;
  result.predictions.resize(images.size());
  std::vector<std::vector<std::optional<double>>> per_case(images.size());
  std::vector<BoundaryCounts> boundary(images.size());
  detail::for_each_block(
      images.size(), config.threads,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          result.predictions[i] = predict(model, codebook, images[i], config.decode_mode);
          per_case[i] = case_dsc(result.predictions[i], images[i].labels, n_classes);
          boundary[i] = boundary_error_counts(result.predictions[i], images[i].labels);
        }
      },
      1);
  std::size_t correct = 0, total = 0;
  std::vector<LabelVolume> truths;
  truths.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    result.boundary += boundary[i];
    const auto pred = result.predictions[i].labels();
    const auto truth = images[i].labels.labels();
    for (std::size_t p = 0; p < truth.size(); ++p) correct += pred[p] == truth[p];
    total += truth.size();
    truths.push_back(images[i].labels);
  }
  result.voxel_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  result.report = aggregate(std::move(per_case), {config.include_background, 0});
  result.sizes = dsc_vs_structure_size(result.report, truths);
  return result;
}

namespace {

struct TrainingSample {
  ImageView view;
  std::span<const std::uint16_t> labels;
  std::vector<std::uint8_t> bits;
};

EpochRecord validation_record(unsigned epoch, double loss, const ToyModel& model,
                              const std::optional<Codebook>& codebook, std::span<const SyntheticImage> images,
                              const EvalConfig& eval) {
  const EvalResult r = evaluate(model, codebook, images, eval);
  EpochRecord rec;
  rec.epoch = epoch;
  rec.loss = loss;
  rec.mean_dsc = r.report.cohort_mean;
  rec.boundary_fraction = r.boundary.fraction();
  const unsigned n_classes = model.arch().n_classes;
  rec.class_dsc.assign(n_classes, std::nullopt);
  for (unsigned c = 0; c < n_classes; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : r.report.per_case_per_class) {
      if (row[c]) {
        sum += *row[c];
        ++n;
      }
    }
    if (n > 0) rec.class_dsc[c] = sum / static_cast<double>(n);
  }
  return rec;
}

bool all_finite(std::span<const double> values) {
  return std::ranges::all_of(values, [](double v) { return std::isfinite(v); });
}

}  // namespace

TrainResult train(ToyModel model, const SyntheticDataset& dataset, const std::optional<Codebook>& codebook,
                  const RunConfig& config, const EpochCallback& on_epoch) {
  if (dataset.train.empty()) throw std::invalid_argument("train: empty training split");
  const Architecture& arch = model.arch();
  if (arch.n_features != dataset.n_features() || arch.n_classes != dataset.config.n_classes) {
    throw std::invalid_argument("train: model does not match the dataset");
  }
  const bool binary = arch.head != HeadKind::OneHot;
  if (binary) {
    if (!codebook) throw std::invalid_argument("train: binary heads need a codebook");
    if (codebook->n_classes() != arch.n_classes || codebook->n_encoded_bits() != arch.n_channels()) {
      throw std::invalid_argument("train: codebook produces " + std::to_string(codebook->n_encoded_bits()) +
                                  " bits, head has " + std::to_string(arch.n_channels()) + " channels");
    }
  }

  std::vector<TrainingSample> samples;
  samples.reserve(dataset.train.size());
  for (const auto& img : dataset.train) {
    samples.push_back({view_of(img, arch.n_features), img.labels.labels(),
                       binary ? image_bits(*codebook, img.labels.labels()) : std::vector<std::uint8_t>{}});
  }

  ObjectiveSettings settings;
  settings.onehot_dice = config.loss.dice;
  settings.binary.include_dice = config.loss.dice;
  settings.binary.smoothing = config.loss.smoothing;
  std::vector<double> bit_weights;
  if (binary && config.loss.weighted_bce) {
    // one channel-major matrix over every training pixel
    const unsigned k = arch.n_channels();
    std::size_t total = 0;
    for (const auto& s : samples) total += s.labels.size();
    std::vector<double> all(k * total);
    std::size_t offset = 0;
    for (const auto& s : samples) {
      const std::size_t n = s.labels.size();
      for (unsigned c = 0; c < k; ++c) {
        for (std::size_t p = 0; p < n; ++p) all[c * total + offset + p] = s.bits[c * n + p];
      }
      offset += n;
    }
    bit_weights = inverse_frequency_bit_weights({all, k, total});
    settings.binary.bit_weights = bit_weights;
  }

  const std::span<const SyntheticImage> val = dataset.val.empty() ? std::span<const SyntheticImage>(dataset.train)
                                                                  : std::span<const SyntheticImage>(dataset.val);
  const auto& opt = config.optimizer;
  std::vector<std::size_t> order(samples.size());
  std::vector<double> grad(model.params().size());
  TrainResult result{model, {}, std::nullopt};
  for (unsigned epoch = 1; epoch <= opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(opt.seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::ranges::fill(grad, 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const TrainingSample& s = samples[order[b]];
        loss_sum += result.model.objective(s.view, {s.labels, s.bits}, settings, grad, scale);
      }
      auto params = result.model.params();
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= opt.learning_rate * grad[i];
    }
    const double loss = loss_sum / static_cast<double>(samples.size());
    if (!std::isfinite(loss) || !all_finite(result.model.params())) {
      result.failed_epoch = epoch;
      EpochRecord rec;
      rec.epoch = epoch;
      rec.loss = loss;
      rec.mean_dsc = std::nan("");
      rec.boundary_fraction = std::nan("");
      rec.class_dsc.assign(arch.n_classes, std::nullopt);
      result.log.push_back(rec);
      if (on_epoch) on_epoch(rec);
      break;
    }
    result.log.push_back(validation_record(epoch, loss, result.model, codebook, val, config.eval));
    if (on_epoch) on_epoch(result.log.back());
  }
  return result;
}

std::string epoch_log_header(unsigned n_classes) {
  std::string h = "epoch,loss,mean_dsc";
  for (unsigned c = 0; c < n_classes; ++c) h += ",dsc_" + std::to_string(c);
  return h + ",boundary_fraction";
}

std::string epoch_log_row(const EpochRecord& r) {
  std::string row = std::to_string(r.epoch) + "," + format_double(r.loss) + "," + format_double(r.mean_dsc);
  for (const auto& d : r.class_dsc) row += "," + (d ? format_double(*d) : std::string());
  return row + "," + format_double(r.boundary_fraction);
}

std::vector<ComparisonRow> compare_structure_sizes(std::span<const StructureSizeRow> a,
                                                   std::span<const StructureSizeRow> b) {
  std::vector<ComparisonRow> rows;
  for (const auto& ra : a) {
    const auto it = std::ranges::find(b, ra.class_index, &StructureSizeRow::class_index);
    if (it == b.end()) continue;
    rows.push_back({ra.class_index, ra.mean_voxels, ra.mean_dsc, it->mean_dsc});
  }
  std::ranges::stable_sort(rows, {}, &ComparisonRow::mean_voxels);
  return rows;
}

void write_comparison_csv(std::span<const ComparisonRow> rows, std::string_view name_a, std::string_view name_b,
                          const std::filesystem::path& path) {
  std::ostringstream out;
  out << "class_id,mean_voxels,dsc_" << name_a << ",dsc_" << name_b << ",difference\n";
  for (const auto& r : rows) {
    out << r.class_index << ',' << format_double(r.mean_voxels) << ',' << format_double(r.dsc_a) << ','
        << format_double(r.dsc_b) << ',' << format_double(r.difference()) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace compactseg
