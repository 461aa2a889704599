#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "compactseg/volume.hpp"

namespace compactseg {

// 2|P∩G| / (|P| + |G|) for one class; nullopt when the class is absent from
// both volumes.
std::optional<double> dsc_per_class(const LabelVolume& prediction, const LabelVolume& truth, unsigned class_index);

// All classes of one case in a single pass.
std::vector<std::optional<double>> case_dsc(const LabelVolume& prediction, const LabelVolume& truth,
                                            unsigned n_classes);

struct AggregateOptions {
  bool include_background = true;
  unsigned background_class = 0;
};

// Case-then-cohort averaging. Per-case means skip classes absent from both
// volumes; cohort statistics run over cases that have at least one class.
struct DscReport {
  std::vector<std::vector<std::optional<double>>> per_case_per_class;
  std::vector<std::optional<double>> per_case_mean;
  double cohort_mean = 0.0;
  double cohort_std = 0.0;  // sample std (n - 1), reported as 0 for a single case
  std::size_t n_cases = 0;  // cases contributing to the cohort statistics
  std::vector<std::pair<std::size_t, unsigned>> classes_skipped;  // (case, class) absent in both
  std::vector<std::size_t> cases_excluded;                        // no class present at all
  AggregateOptions options;
};

DscReport aggregate(std::vector<std::vector<std::optional<double>>> per_case_per_class,
                    AggregateOptions options = {});

struct BoundaryCounts {
  std::size_t misclassified = 0;
  std::size_t on_boundary = 0;  // misclassified voxels whose truth 6-neighbourhood has > 1 class

  double fraction() const {
    return misclassified == 0 ? 0.0 : static_cast<double>(on_boundary) / static_cast<double>(misclassified);
  }
  BoundaryCounts& operator+=(const BoundaryCounts& o) {
    misclassified += o.misclassified;
    on_boundary += o.on_boundary;
    return *this;
  }
};

BoundaryCounts boundary_error_counts(const LabelVolume& prediction, const LabelVolume& truth);
double boundary_error_fraction(const LabelVolume& prediction, const LabelVolume& truth);

// True where a voxel's 6-neighbourhood in `truth` contains another class.
std::vector<std::uint8_t> boundary_mask(const LabelVolume& truth);

struct StructureSizeRow {
  unsigned class_index = 0;
  double mean_voxels = 0.0;  // mean ground-truth voxel count over cases
  double mean_dsc = 0.0;     // mean over cases where the class is not absent-in-both
};

// Classes present in at least one truth, sorted by mean size (ascending).
std::vector<StructureSizeRow> dsc_vs_structure_size(const DscReport& report, std::span<const LabelVolume> truths);

// case_id,class_id,dsc,skipped
void write_dsc_report_csv(const DscReport& report, const std::filesystem::path& path);
// cohort_mean,cohort_std,n_cases,dispersion
void write_dsc_summary_csv(const DscReport& report, const std::filesystem::path& path);
// class_id,mean_voxels,mean_dsc
void write_structure_size_csv(std::span<const StructureSizeRow> rows, const std::filesystem::path& path);

}  // namespace compactseg
