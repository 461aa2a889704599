#include "compactseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "compactseg/io.hpp"

namespace compactseg {

namespace {

void check_dims(const LabelVolume& a, const LabelVolume& b) {
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument("volume dims differ: " + a.dims().str() + " vs " + b.dims().str());
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::optional<double> dsc_per_class(const LabelVolume& prediction, const LabelVolume& truth, unsigned class_index) {
  check_dims(prediction, truth);
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    const bool in_p = prediction[v] == class_index;
    const bool in_g = truth[v] == class_index;
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return std::nullopt;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<std::optional<double>> case_dsc(const LabelVolume& prediction, const LabelVolume& truth,
                                            unsigned n_classes) {
  check_dims(prediction, truth);
  std::vector<std::size_t> p(n_classes, 0), g(n_classes, 0), both(n_classes, 0);
  for (std::size_t v = 0; v < truth.size(); ++v) {
    const unsigned a = prediction[v];
    const unsigned b = truth[v];
    if (a >= n_classes || b >= n_classes) throw std::invalid_argument("case_dsc: label outside class range");
    ++p[a];
    ++g[b];
    if (a == b) ++both[a];
  }
  std::vector<std::optional<double>> out(n_classes);
  for (unsigned c = 0; c < n_classes; ++c) {
    if (p[c] + g[c] > 0) out[c] = 2.0 * static_cast<double>(both[c]) / static_cast<double>(p[c] + g[c]);
  }
  return out;
}

DscReport aggregate(std::vector<std::vector<std::optional<double>>> per_case_per_class, AggregateOptions options) {
  if (per_case_per_class.empty()) throw std::invalid_argument("aggregate needs at least one case");
  DscReport r;
  r.options = options;
  r.per_case_per_class = std::move(per_case_per_class);
  std::vector<double> means;
  for (std::size_t i = 0; i < r.per_case_per_class.size(); ++i) {
    const auto& row = r.per_case_per_class[i];
    double sum = 0.0;
    std::size_t count = 0;
    for (unsigned c = 0; c < row.size(); ++c) {
      if (!options.include_background && c == options.background_class) continue;
      if (!row[c]) {
        r.classes_skipped.emplace_back(i, c);
        continue;
      }
      sum += *row[c];
      ++count;
    }
    if (count == 0) {
      r.per_case_mean.emplace_back(std::nullopt);
      r.cases_excluded.push_back(i);
    } else {
      r.per_case_mean.emplace_back(sum / static_cast<double>(count));
      means.push_back(sum / static_cast<double>(count));
    }
  }
  r.n_cases = means.size();
  if (means.empty()) {
    r.cohort_mean = std::nan("");
    r.cohort_std = std::nan("");
    return r;
  }
  double total = 0.0;
  for (const double m : means) total += m;
  r.cohort_mean = total / static_cast<double>(means.size());
  if (means.size() > 1) {
    double ss = 0.0;
    for (const double m : means) ss += (m - r.cohort_mean) * (m - r.cohort_mean);
    r.cohort_std = std::sqrt(ss / static_cast<double>(means.size() - 1));
  }
  return r;
}

std::vector<std::uint8_t> boundary_mask(const LabelVolume& truth) {
  const Dims& d = truth.dims();
  std::vector<std::uint8_t> mask(truth.size(), 0);
  for (std::size_t k = 0; k < d.z; ++k) {
    for (std::size_t j = 0; j < d.y; ++j) {
      for (std::size_t i = 0; i < d.x; ++i) {
        const std::size_t v = d.index(i, j, k);
        auto mark = [&](std::size_t u) {
          if (truth[u] != truth[v]) {
            mask[u] = 1;
            mask[v] = 1;
          }
        };
        if (i + 1 < d.x) mark(d.index(i + 1, j, k));
        if (j + 1 < d.y) mark(d.index(i, j + 1, k));
        if (k + 1 < d.z) mark(d.index(i, j, k + 1));
      }
    }
  }
  return mask;
}

BoundaryCounts boundary_error_counts(const LabelVolume& prediction, const LabelVolume& truth) {
  check_dims(prediction, truth);
  const auto mask = boundary_mask(truth);
  BoundaryCounts counts;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (prediction[v] == truth[v]) continue;
    ++counts.misclassified;
    counts.on_boundary += mask[v];
  }
  return counts;
}

double boundary_error_fraction(const LabelVolume& prediction, const LabelVolume& truth) {
  return boundary_error_counts(prediction, truth).fraction();
}

std::vector<StructureSizeRow> dsc_vs_structure_size(const DscReport& report, std::span<const LabelVolume> truths) {
  if (truths.size() != report.per_case_per_class.size()) {
    throw std::invalid_argument("dsc_vs_structure_size: report and truth volumes cover different cases");
  }
  const std::size_t n_classes = report.per_case_per_class.empty() ? 0 : report.per_case_per_class.front().size();
  std::vector<double> voxels(n_classes, 0.0), dsc_sum(n_classes, 0.0);
  std::vector<std::size_t> dsc_count(n_classes, 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    for (const auto label : truths[i].labels()) {
      if (label < n_classes) voxels[label] += 1.0;
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (const auto& d = report.per_case_per_class[i][c]) {
        dsc_sum[c] += *d;
        ++dsc_count[c];
      }
    }
  }
  std::vector<StructureSizeRow> rows;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (voxels[c] == 0.0) continue;
    rows.push_back({static_cast<unsigned>(c), voxels[c] / static_cast<double>(truths.size()),
                    dsc_count[c] ? dsc_sum[c] / static_cast<double>(dsc_count[c]) : 0.0});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.mean_voxels < b.mean_voxels; });
  return rows;
}

void write_dsc_report_csv(const DscReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "case_id,class_id,dsc,skipped\n";
  for (std::size_t i = 0; i < report.per_case_per_class.size(); ++i) {
    const auto& row = report.per_case_per_class[i];
    for (unsigned c = 0; c < row.size(); ++c) {
      if (!report.options.include_background && c == report.options.background_class) continue;
      out << i << ',' << c << ',' << (row[c] ? format_double(*row[c]) : "") << ',' << (row[c] ? 0 : 1) << '\n';
    }
  }
}

void write_dsc_summary_csv(const DscReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "cohort_mean,cohort_std,n_cases,dispersion\n";
  out << format_double(report.cohort_mean) << ',' << format_double(report.cohort_std) << ',' << report.n_cases
      << ",sample_std_of_case_means\n";
}

void write_structure_size_csv(std::span<const StructureSizeRow> rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "class_id,mean_voxels,mean_dsc\n";
  for (const auto& r : rows) {
    out << r.class_index << ',' << format_double(r.mean_voxels) << ',' << format_double(r.mean_dsc) << '\n';
  }
}

}  // namespace compactseg
