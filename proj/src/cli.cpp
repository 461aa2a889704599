#include "compactseg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "compactseg/assign.hpp"
#include "compactseg/codebook.hpp"
#include "compactseg/decode.hpp"
#include "compactseg/gradcheck.hpp"
#include "compactseg/io.hpp"
#include "compactseg/manifest.hpp"
#include "compactseg/rng.hpp"
#include "compactseg/synthetic.hpp"
#include "compactseg/train.hpp"
#include "compactseg/volume.hpp"
#include "json.hpp"

#ifndef COMPACTSEG_VERSION
#define COMPACTSEG_VERSION "0.0.0"
#endif

namespace compactseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A failure that is not the caller's fault in how the tool was invoked.
struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Collects what a command reads and writes; the manifest is assembled from it
// once the command has finished.
class Session {
 public:
  Session(std::string command, std::span<const std::string> args, std::ostream& out)
      : out(out), start_(std::chrono::steady_clock::now()) {
    manifest_.tool_version = COMPACTSEG_VERSION;
    manifest_.command = std::move(command);
    manifest_.argv.assign(args.begin(), args.end());
    manifest_.cwd = fs::current_path().string();
  }

  std::ostream& out;
  json config = json::object();

  void input(const fs::path& path) { manifest_.inputs.push_back(record_file(path)); }
  void volume_input(const fs::path& path) {
    input(path);
    input(sidecar_path(path));
  }
  void output(const fs::path& path) { outputs_.push_back(path); }
  void volume_output(const fs::path& path) {
    output(path);
    output(sidecar_path(path));
  }
  void seed(const std::string& name, std::uint64_t value) { manifest_.seeds[name] = value; }
  void stat(const std::string& name, double value) { manifest_.stats[name] = value; }

  void set_manifest_path(fs::path path) { manifest_path_ = std::move(path); }
  void default_manifest_path(const fs::path& path) {
    if (manifest_path_.empty()) manifest_path_ = path;
  }

  void finish() {
    if (manifest_path_.empty()) return;
    for (const auto& p : outputs_) manifest_.outputs.push_back(record_file(p));
    manifest_.config_json = config.dump();
    manifest_.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    save_manifest(manifest_, manifest_path_);
  }

 private:
  RunManifest manifest_;
  std::vector<fs::path> outputs_;
  fs::path manifest_path_;
  std::chrono::steady_clock::time_point start_;
};

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path p = path;
  p += suffix;
  return p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RunFailure("cannot create directory " + dir.string() + ": " + ec.message());
}

Scheme scheme_option(const std::string& name) { return parse_scheme(name); }

// Console numbers; files keep full precision.
std::string brief(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

// ---------------------------------------------------------------- codebook

struct CodebookBuildArgs {
  unsigned classes = 0;
  std::string scheme = "vanilla";
  std::optional<std::uint64_t> seed;
  unsigned background = 0;
  std::string out;
};

void cmd_codebook_build(const CodebookBuildArgs& a, Session& s) {
  if (a.classes < 2) throw std::invalid_argument("--classes must be at least 2");
  const Scheme scheme = scheme_option(a.scheme);
  Codebook cb = a.seed ? build_random_codebook(a.classes, scheme, *a.seed) : identity_codebook(a.classes, scheme);
  if (a.background != 0) {
    const auto words = cb.assignment();
    cb = Codebook(scheme, std::vector<std::uint32_t>(words.begin(), words.end()), a.background, cb.n_data_bits());
  }
  save_codebook(cb, a.out);
  s.output(a.out);
  s.default_manifest_path(with_suffix(a.out, ".manifest.json"));
  s.config = {{"classes", a.classes},
              {"scheme", std::string(to_string(scheme))},
              {"assignment", a.seed ? "random" : "identity"},
              {"background", a.background}};
  if (a.seed) s.seed("seed", *a.seed);
  s.out << "wrote " << a.out << ": " << cb.n_classes() << " classes, " << cb.n_data_bits() << " data bits, "
        << cb.n_encoded_bits() << " encoded bits\n";
}

void cmd_codebook_inspect(const std::string& in, Session& s) {
  const Codebook cb = load_codebook(in);
  s.input(in);
  const ReductionFactor r = memory_reduction_factor(cb.n_classes(), cb.scheme());
  s.config = {{"in", in}};
  s.out << "n_classes: " << cb.n_classes() << "\n"
        << "scheme: " << to_string(cb.scheme()) << "\n"
        << "n_data_bits: " << cb.n_data_bits() << "\n"
        << "n_encoded_bits: " << cb.n_encoded_bits() << "\n"
        << "background_class: " << cb.background_class() << "\n"
        << "reduction_factor: " << r.n_classes << "/" << r.n_channels << " = " << brief(r.value()) << "\n"
        << "assignment_digest: " << to_hex(assignment_digest(cb)) << "\n";
}

// ---------------------------------------------------------------- volumes

void cmd_encode(const std::string& labels_path, const std::string& codebook_path, const std::string& out,
                Session& s) {
  const LabelVolume labels = load_label_volume(labels_path);
  const Codebook cb = load_codebook(codebook_path);
  s.volume_input(labels_path);
  s.input(codebook_path);
  const BitVolume bits = encode_labels(labels, cb);
  save_prob_volume(to_probabilities(bits), out);
  s.volume_output(out);
  s.default_manifest_path(with_suffix(out, ".manifest.json"));
  s.config = {{"labels", labels_path}, {"codebook", codebook_path}};
  s.stat("voxels", static_cast<double>(labels.dims().voxels()));
  s.stat("channels", bits.n_channels());
  s.out << "encoded " << labels.dims().str() << " into " << bits.n_channels() << " channels\n";
}

void cmd_decode(const std::string& in, const std::string& codebook_path, const std::string& mode_name,
                unsigned threads, const std::string& out, Session& s) {
  const DecodeMode mode = parse_decode_mode(mode_name);
  const ProbVolume probs = load_prob_volume(in);
  const Codebook cb = load_codebook(codebook_path);
  s.volume_input(in);
  s.input(codebook_path);
  const DecodeOptions opts{threads};
  const LabelVolume labels = mode == DecodeMode::Hard ? hard_decode(probs, cb, opts) : soft_decode(probs, cb, opts);
  save_label_volume(labels, out);
  s.volume_output(out);
  s.default_manifest_path(with_suffix(out, ".manifest.json"));
  s.config = {{"in", in}, {"codebook", codebook_path}, {"mode", std::string(to_string(mode))}};
  s.out << "decoded " << labels.dims().str() << " (" << to_string(mode) << ")\n";
}

void cmd_corrupt(const std::string& in, double flip_prob, std::uint64_t seed, const std::string& out, Session& s) {
  const ProbVolume probs = load_prob_volume(in);
  s.volume_input(in);
  const CorruptionResult r = corrupt_bits(binarize(probs), flip_prob, seed);
  save_prob_volume(to_probabilities(r.bits), out);
  s.volume_output(out);
  s.default_manifest_path(with_suffix(out, ".manifest.json"));
  s.config = {{"in", in}, {"flip_prob", flip_prob}};
  s.seed("seed", seed);
  s.stat("flips", static_cast<double>(r.flips));
  s.stat("bits", static_cast<double>(r.bits.values().size()));
  s.out << "flipped " << r.flips << " of " << r.bits.values().size() << " bits\n";
}

// ---------------------------------------------------------------- assign

struct AssignArgs {
  std::string labels_dir;
  std::string scheme = "vanilla";
  std::uint64_t seed = 1;
  long iters = 1000;
  std::optional<unsigned> classes;
  unsigned baseline_seeds = 20;
  unsigned threads = 1;
  std::string out;
  std::string report;
};

// Label volumes of a directory: every non-sidecar file that has a sidecar.
std::vector<fs::path> label_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("--labels-dir " + dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() == ".json") continue;
    if (fs::exists(sidecar_path(entry.path()))) files.push_back(entry.path());
  }
  std::ranges::sort(files);
  if (files.empty()) throw std::invalid_argument("--labels-dir " + dir.string() + " holds no label volumes");
  return files;
}

void cmd_assign(const AssignArgs& a, Session& s) {
  const Scheme scheme = scheme_option(a.scheme);
  if (a.iters <= 0) throw std::invalid_argument("--iters must be positive");
  std::vector<LabelVolume> volumes;
  std::vector<std::string> failures;
  for (const auto& f : label_files(a.labels_dir)) {
    try {
      volumes.push_back(load_label_volume(f));
      s.volume_input(f);
    } catch (const std::exception& e) {
      failures.push_back(e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " unreadable volume(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw RunFailure(msg);
  }
  unsigned n_classes = 0;
  for (const auto& v : volumes) {
    for (auto l : v.labels()) n_classes = std::max(n_classes, static_cast<unsigned>(l) + 1);
  }
  if (a.classes) {
    if (*a.classes < n_classes) {
      throw std::invalid_argument("--classes " + std::to_string(*a.classes) + " but labels reach class " +
                                  std::to_string(n_classes - 1));
    }
    n_classes = *a.classes;
  }
  n_classes = std::max(n_classes, 2u);

  const ClassAdjacencyGraph graph = build_adjacency(volumes, n_classes, a.threads);
  const AssignmentResult result = optimize_assignment(graph, scheme, a.seed, a.iters);
  save_codebook(result.codebook, a.out);
  s.output(a.out);

  std::ostringstream report;
  report << "kind,seed,cost\n";
  report << "optimized," << a.seed << ',' << result.cost << '\n';
  report << "greedy," << a.seed << ',' << result.greedy_cost << '\n';
  double random_sum = 0.0;
  for (unsigned i = 0; i < a.baseline_seeds; ++i) {
    const std::uint64_t seed = derive_seed(a.seed, i + 1);
    const std::uint64_t cost = assignment_cost(graph, build_random_codebook(n_classes, scheme, seed));
    random_sum += static_cast<double>(cost);
    report << "random," << seed << ',' << cost << '\n';
  }
  const fs::path report_path = a.report.empty() ? with_suffix(a.out, ".report.csv") : fs::path(a.report);
  write_text_file(report_path, report.str());
  s.output(report_path);
  s.default_manifest_path(with_suffix(a.out, ".manifest.json"));

  const double random_mean = a.baseline_seeds ? random_sum / a.baseline_seeds : std::nan("");
  s.config = {{"labels_dir", a.labels_dir}, {"scheme", std::string(to_string(scheme))}, {"iters", a.iters},
              {"classes", n_classes},       {"baseline_seeds", a.baseline_seeds}};
  s.seed("seed", a.seed);
  s.stat("optimized_cost", static_cast<double>(result.cost));
  s.stat("greedy_cost", static_cast<double>(result.greedy_cost));
  s.stat("sweeps", static_cast<double>(result.iterations));
  if (a.baseline_seeds) s.stat("random_mean_cost", random_mean);
  s.out << "volumes: " << volumes.size() << ", classes: " << n_classes << ", edges: " << graph.n_edges() << "\n"
        << "optimized cost: " << result.cost << " (greedy " << result.greedy_cost << ", " << result.iterations
        << " sweeps)\n";
  if (a.baseline_seeds) {
    s.out << "random mean cost over " << a.baseline_seeds << " seeds: " << brief(random_mean) << "\n";
  }
}

// ---------------------------------------------------------------- training

void note_run_config(Session& s, const std::string& config_path, const RunConfig& cfg) {
  s.input(config_path);
  s.config["run_config"] = json::parse(run_config_to_json(cfg));
  s.seed("dataset", cfg.dataset.seed);
  s.seed("model", cfg.model.seed);
  s.seed("optimizer", cfg.optimizer.seed);
  if (cfg.codebook.source == "random") s.seed("codebook", cfg.codebook.seed);
}

RunConfig config_for_head(RunConfig cfg, const std::string& head) {
  if (!head.empty()) cfg.model.head = parse_head(head);
  return cfg;
}

struct TrainArgs {
  std::string config;
  std::string out_dir;
  std::string head;
};

void cmd_train(const TrainArgs& a, Session& s) {
  const RunConfig cfg = config_for_head(load_run_config(a.config), a.head);
  note_run_config(s, a.config, cfg);
  const fs::path dir = a.out_dir;
  ensure_dir(dir);
  s.default_manifest_path(dir / "manifest.json");
  const auto codebook = resolve_codebook(cfg, fs::path(a.config).parent_path());
  const SyntheticDataset ds = generate_synthetic(cfg.dataset);
  s.stat("dataset_attempt", ds.attempt);

  write_text_file(dir / "config.json", run_config_to_json(cfg));
  s.output(dir / "config.json");
  if (codebook) {
    save_codebook(*codebook, dir / "codebook.json");
    s.output(dir / "codebook.json");
  }
  const fs::path log_path = dir / "epoch_log.csv";
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw RunFailure("cannot write " + log_path.string());
  log << epoch_log_header(cfg.dataset.n_classes) << '\n';
  const TrainResult r = train(ToyModel(architecture_for(cfg), cfg.model.seed), ds, codebook, cfg,
                              [&](const EpochRecord& e) { log << epoch_log_row(e) << '\n' << std::flush; });
  log.close();
  s.output(log_path);
  s.stat("epochs_run", static_cast<double>(r.log.size()));
  if (!r.ok()) {
    s.stat("failed_epoch", *r.failed_epoch);
    s.finish();
    throw RunFailure("training diverged: non-finite loss at epoch " + std::to_string(*r.failed_epoch));
  }
  save_model(r.model, dir / "model.json");
  s.output(dir / "model.json");
  const EpochRecord& last = r.log.back();
  s.stat("final_loss", last.loss);
  s.stat("final_mean_dsc", last.mean_dsc);
  s.stat("final_boundary_fraction", last.boundary_fraction);
  s.out << "head " << to_string(cfg.model.head) << ": " << r.log.size() << " epochs, loss "
        << brief(last.loss) << ", validation mean DSC " << brief(last.mean_dsc) << "\n";
}

struct EvalArgs {
  std::string config;
  std::string out_dir;
  std::string model;
  std::string codebook;
  std::string mode;
  std::string split = "val";
  std::string compare;
  unsigned threads = 1;
};

std::span<const SyntheticImage> split_of(const SyntheticDataset& ds, const std::string& split) {
  if (split == "val") {
    if (ds.val.empty()) throw std::invalid_argument("the validation split is empty (dataset.n_val = 0)");
    return ds.val;
  }
  if (split == "train") return ds.train;
  throw std::invalid_argument("--split must be val or train");
}

void write_eval(const EvalResult& r, const fs::path& dir, const std::string& prefix, Session& s) {
  const auto out = [&](const std::string& name) {
    const fs::path p = dir / (prefix + name);
    s.output(p);
    return p;
  };
  write_dsc_report_csv(r.report, out("dsc_report.csv"));
  write_dsc_summary_csv(r.report, out("dsc_summary.csv"));
  write_structure_size_csv(r.sizes, out("structure_size.csv"));
  write_text_file(out("boundary.csv"), "misclassified,on_boundary,boundary_fraction,voxel_accuracy\n" +
                                           std::to_string(r.boundary.misclassified) + "," +
                                           std::to_string(r.boundary.on_boundary) + "," +
                                           format_double(r.boundary.fraction()) + "," +
                                           format_double(r.voxel_accuracy) + "\n");
}

void cmd_eval(const EvalArgs& a, Session& s) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.mode.empty()) cfg.eval.decode_mode = parse_decode_mode(a.mode);
  cfg.eval.threads = a.threads;
  const fs::path dir = a.out_dir;
  const fs::path base = fs::path(a.config).parent_path();
  const SyntheticDataset ds = generate_synthetic(cfg.dataset);
  const auto images = split_of(ds, a.split);
  s.config["split"] = a.split;

  if (!a.compare.empty()) {
    if (!a.model.empty()) throw std::invalid_argument("--compare trains its heads from the config; drop --model");
    const auto comma = a.compare.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("--compare expects two heads, e.g. onehot,binary");
    const std::string names[2] = {a.compare.substr(0, comma), a.compare.substr(comma + 1)};
    note_run_config(s, a.config, cfg);
    s.config["compare"] = a.compare;
    ensure_dir(dir);
    s.default_manifest_path(dir / "manifest.json");
    std::vector<StructureSizeRow> sizes[2];
    for (int i = 0; i < 2; ++i) {
      const RunConfig hc = config_for_head(cfg, names[i]);
      const auto codebook = resolve_codebook(hc, base);
      const TrainResult r = train(ToyModel(architecture_for(hc), hc.model.seed), ds, codebook, hc);
      if (!r.ok()) {
        throw RunFailure("training " + names[i] + " diverged at epoch " + std::to_string(*r.failed_epoch));
      }
      const EvalResult ev = evaluate(r.model, codebook, images, hc.eval);
      write_eval(ev, dir, names[i] + "_", s);
      sizes[i] = ev.sizes;
      s.stat(names[i] + "_mean_dsc", ev.report.cohort_mean);
      s.stat(names[i] + "_boundary_fraction", ev.boundary.fraction());
      s.out << names[i] << ": mean DSC " << brief(ev.report.cohort_mean) << " (sd "
            << brief(ev.report.cohort_std) << "), boundary fraction " << brief(ev.boundary.fraction())
            << "\n";
    }
    const auto rows = compare_structure_sizes(sizes[0], sizes[1]);
    write_comparison_csv(rows, names[0], names[1], dir / "dsc_difference.csv");
    s.output(dir / "dsc_difference.csv");
    return;
  }

  if (a.model.empty()) throw std::invalid_argument("eval needs --model or --compare");
  const ToyModel model = load_model(a.model);
  s.input(a.model);
  cfg.model.head = model.arch().head;
  cfg.model.hidden = model.arch().hidden;
  if (model.arch() != architecture_for(cfg)) throw std::invalid_argument("--model does not match the config's dataset");
  note_run_config(s, a.config, cfg);
  std::optional<Codebook> codebook;
  if (!a.codebook.empty()) {
    codebook = load_codebook(a.codebook);
    s.input(a.codebook);
  } else {
    codebook = resolve_codebook(cfg, base);
  }
  ensure_dir(dir);
  s.default_manifest_path(dir / "manifest.json");
  const EvalResult ev = evaluate(model, codebook, images, cfg.eval);
  write_eval(ev, dir, "", s);
  s.stat("mean_dsc", ev.report.cohort_mean);
  s.stat("boundary_fraction", ev.boundary.fraction());
  s.stat("voxel_accuracy", ev.voxel_accuracy);
  s.out << "mean DSC " << brief(ev.report.cohort_mean) << " (sd " << brief(ev.report.cohort_std)
        << ", n=" << ev.report.n_cases << "), boundary fraction " << brief(ev.boundary.fraction()) << "\n";
}

void cmd_gradcheck(std::uint64_t seed, const std::string& out, Session& s) {
  const auto results = run_gradcheck(seed);
  s.seed("seed", seed);
  std::ostringstream csv;
  csv << "name,max_relative_error,tolerance,n_checked,passed\n";
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed();
    s.out << (r.passed() ? "PASS " : "FAIL ") << r.name << " max_rel_err=" << brief(r.max_relative_error)
          << " tol=" << brief(r.tolerance) << "\n";
    csv << r.name << ',' << brief(r.max_relative_error) << ',' << brief(r.tolerance) << ','
        << r.n_checked << ',' << (r.passed() ? 1 : 0) << '\n';
  }
  if (!out.empty()) {
    write_text_file(out, csv.str());
    s.output(out);
    s.default_manifest_path(with_suffix(out, ".manifest.json"));
  }
  s.stat("failures", static_cast<double>(std::ranges::count_if(results, [](const auto& r) { return !r.passed(); })));
  if (!ok) {
    s.finish();
    throw RunFailure("gradient check failed");
  }
}

void cmd_synth(const std::string& config_path, const std::string& out_dir, Session& s) {
  const RunConfig cfg = load_run_config(config_path);
  note_run_config(s, config_path, cfg);
  const fs::path dir = out_dir;
  ensure_dir(dir);
  s.default_manifest_path(dir / "manifest.json");
  const SyntheticDataset ds = generate_synthetic(cfg.dataset);
  const auto dump = [&](const std::vector<SyntheticImage>& images, const std::string& prefix) {
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%s_%03zu.labels", prefix.c_str(), i);
      save_label_volume(images[i].labels, dir / name);
      s.volume_output(dir / name);
    }
  };
  dump(ds.train, "train");
  dump(ds.val, "val");
  s.stat("dataset_attempt", ds.attempt);
  s.out << "wrote " << ds.train.size() << " training and " << ds.val.size() << " validation label maps to "
        << dir.string() << "\n";
}

// Restores the working directory on scope exit.
class WorkingDirectory {
 public:
  explicit WorkingDirectory(const fs::path& dir) : saved_(fs::current_path()) { fs::current_path(dir); }
  ~WorkingDirectory() {
    std::error_code ec;
    fs::current_path(saved_, ec);
  }
  WorkingDirectory(const WorkingDirectory&) = delete;
  WorkingDirectory& operator=(const WorkingDirectory&) = delete;

 private:
  fs::path saved_;
};

int cmd_replay(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const RunManifest recorded = load_manifest(manifest_path);
  if (recorded.command == "replay") throw std::invalid_argument("a replay manifest cannot be replayed");
  WorkingDirectory cwd(recorded.cwd);
  std::ostringstream inner_out;
  const int code = run_cli(recorded.argv, inner_out, err);
  if (code != kExitOk) {
    err << "replay: command exited with " << code << "\n";
    return kExitFailure;
  }
  std::size_t mismatches = 0;
  for (const auto& f : recorded.outputs) {
    const std::string now = fs::exists(f.path) ? file_digest(f.path) : std::string("missing");
    const bool same = now == f.digest;
    mismatches += !same;
    out << (same ? "MATCH " : "DIFFER ") << f.path << " " << f.digest << (same ? "" : " -> " + now) << "\n";
  }
  out << (mismatches == 0 ? "replay reproduced " : "replay diverged on ")
      << (mismatches == 0 ? recorded.outputs.size() : mismatches) << " output(s)\n";
  return mismatches == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"compactseg: compact label encodings for segmentation", "compactseg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(COMPACTSEG_VERSION));

  std::string command;
  std::function<void(Session&)> action;
  std::function<int()> direct;  // commands that manage their own output (replay)
  std::string manifest_override;

  const auto add_manifest_flag = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest_override, "Where to write the run manifest");
  };

  // codebook build | inspect
  auto* codebook = app.add_subcommand("codebook", "Build or inspect class-to-codeword assignments");
  codebook->require_subcommand(1);
  CodebookBuildArgs build_args;
  auto* build = codebook->add_subcommand("build", "Write a codebook file");
  build->add_option("--classes", build_args.classes, "Number of classes")->required();
  build->add_option("--scheme", build_args.scheme, "vanilla or hamming74")->capture_default_str();
  build->add_option("--seed", build_args.seed, "Random assignment seed (identity when omitted)");
  build->add_option("--background", build_args.background, "Class for unused codewords")->capture_default_str();
  build->add_option("--out", build_args.out, "Output codebook path")->required();
  add_manifest_flag(build);
  build->callback([&] {
    command = "codebook build";
    action = [&](Session& s) { cmd_codebook_build(build_args, s); };
  });
  std::string inspect_in;
  auto* inspect = codebook->add_subcommand("inspect", "Summarize a codebook file");
  inspect->add_option("--in", inspect_in, "Codebook path")->required();
  add_manifest_flag(inspect);
  inspect->callback([&] {
    command = "codebook inspect";
    action = [&](Session& s) { cmd_codebook_inspect(inspect_in, s); };
  });

  // encode
  std::string enc_labels, enc_codebook, enc_out;
  auto* encode = app.add_subcommand("encode", "Label volume to crisp bit volume");
  encode->add_option("--labels", enc_labels, "Input label volume")->required();
  encode->add_option("--codebook", enc_codebook, "Codebook path")->required();
  encode->add_option("--out", enc_out, "Output bit volume")->required();
  add_manifest_flag(encode);
  encode->callback([&] {
    command = "encode";
    action = [&](Session& s) { cmd_encode(enc_labels, enc_codebook, enc_out, s); };
  });

  // decode
  std::string dec_in, dec_codebook, dec_out, dec_mode = "hard";
  unsigned dec_threads = 1;
  auto* decode = app.add_subcommand("decode", "Probability or bit volume to labels");
  decode->add_option("--in", dec_in, "Input probability volume")->required();
  decode->add_option("--codebook", dec_codebook, "Codebook path")->required();
  decode->add_option("--mode", dec_mode, "hard or soft")->check(CLI::IsMember({"hard", "soft"}))->capture_default_str();
  decode->add_option("--threads", dec_threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  decode->add_option("--out", dec_out, "Output label volume")->required();
  add_manifest_flag(decode);
  decode->callback([&] {
    command = "decode";
    action = [&](Session& s) { cmd_decode(dec_in, dec_codebook, dec_mode, dec_threads, dec_out, s); };
  });

  // corrupt
  std::string cor_in, cor_out;
  double cor_p = 0.0;
  std::uint64_t cor_seed = 0;
  auto* corrupt = app.add_subcommand("corrupt", "Flip bits of a crisp bit volume at random");
  corrupt->add_option("--in", cor_in, "Input bit volume")->required();
  corrupt->add_option("--flip-prob", cor_p, "Per-bit flip probability")->required()->check(CLI::Range(0.0, 1.0));
  corrupt->add_option("--seed", cor_seed, "Random seed")->required();
  corrupt->add_option("--out", cor_out, "Output bit volume")->required();
  add_manifest_flag(corrupt);
  corrupt->callback([&] {
    command = "corrupt";
    action = [&](Session& s) { cmd_corrupt(cor_in, cor_p, cor_seed, cor_out, s); };
  });

  // assign
  AssignArgs assign_args;
  auto* assign = app.add_subcommand("assign", "Optimize the class-to-codeword assignment");
  assign->add_option("--labels-dir", assign_args.labels_dir, "Directory of training label volumes")->required();
  assign->add_option("--scheme", assign_args.scheme, "vanilla or hamming74")->capture_default_str();
  assign->add_option("--seed", assign_args.seed, "Search seed")->capture_default_str();
  assign->add_option("--iters", assign_args.iters, "Maximum local-search sweeps")->capture_default_str();
  assign->add_option("--classes", assign_args.classes, "Number of classes (default: max label + 1)");
  assign->add_option("--baseline-seeds", assign_args.baseline_seeds, "Random assignments to compare against")
      ->capture_default_str();
  assign->add_option("--threads", assign_args.threads, "Worker threads")->check(CLI::PositiveNumber);
  assign->add_option("--out", assign_args.out, "Output codebook path")->required();
  assign->add_option("--report", assign_args.report, "Cost report CSV (default: <out>.report.csv)");
  add_manifest_flag(assign);
  assign->callback([&] {
    command = "assign";
    action = [&](Session& s) { cmd_assign(assign_args, s); };
  });

  // train
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a toy model from a run configuration");
  train_cmd->add_option("--config", train_args.config, "Run configuration (JSON)")->required();
  train_cmd->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  train_cmd->add_option("--head", train_args.head, "Override model.head");
  add_manifest_flag(train_cmd);
  train_cmd->callback([&] {
    command = "train";
    action = [&](Session& s) { cmd_train(train_args, s); };
  });

  // eval
  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model, or compare two heads");
  eval_cmd->add_option("--config", eval_args.config, "Run configuration (JSON)")->required();
  eval_cmd->add_option("--out-dir", eval_args.out_dir, "Output directory")->required();
  eval_cmd->add_option("--model", eval_args.model, "Trained model file");
  eval_cmd->add_option("--codebook", eval_args.codebook, "Codebook (default: from the config)");
  eval_cmd->add_option("--mode", eval_args.mode, "hard or soft (default: from the config)")
      ->check(CLI::IsMember({"hard", "soft"}));
  eval_cmd->add_option("--split", eval_args.split, "val or train")->check(CLI::IsMember({"val", "train"}));
  eval_cmd->add_option("--compare", eval_args.compare, "Train and compare two heads, e.g. onehot,binary");
  eval_cmd->add_option("--threads", eval_args.threads, "Worker threads")->check(CLI::PositiveNumber);
  add_manifest_flag(eval_cmd);
  eval_cmd->callback([&] {
    command = "eval";
    action = [&](Session& s) { cmd_eval(eval_args, s); };
  });

  // gradcheck
  std::uint64_t gc_seed = 1;
  std::string gc_out;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss and head");
  gradcheck->add_option("--seed", gc_seed, "Seed for the check inputs")->capture_default_str();
  gradcheck->add_option("--out", gc_out, "Results CSV");
  add_manifest_flag(gradcheck);
  gradcheck->callback([&] {
    command = "gradcheck";
    action = [&](Session& s) { cmd_gradcheck(gc_seed, gc_out, s); };
  });

  // synth
  std::string syn_config, syn_out;
  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset's label maps");
  synth->add_option("--config", syn_config, "Run configuration (JSON)")->required();
  synth->add_option("--out-dir", syn_out, "Output directory")->required();
  add_manifest_flag(synth);
  synth->callback([&] {
    command = "synth";
    action = [&](Session& s) { cmd_synth(syn_config, syn_out, s); };
  });

  // replay
  std::string replay_manifest;
  auto* replay = app.add_subcommand("replay", "Rerun a recorded command and compare output digests");
  replay->add_option("--manifest", replay_manifest, "Manifest to replay")->required();
  replay->callback([&] { direct = [&] { return cmd_replay(replay_manifest, out, err); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (direct) return direct();
    Session session(command, args, out);
    if (!manifest_override.empty()) session.set_manifest_path(manifest_override);
    action(session);
    session.finish();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace compactseg
