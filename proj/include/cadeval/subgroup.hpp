#pragma once

#include <map>
#include <string>
#include <vector>

#include "cadeval/core.hpp"

namespace cadeval {

struct BinSpec {
  double lo = 0.0, hi = 0.0;
  bool hi_closed = false;  // bins are [lo,hi) unless the upper end is closed
};

std::string bin_label(const BinSpec& b);

// Stratification axes: diameter_range, stage_group, sex, age_band, dataset,
// copd (patient unit); manufacturer, slice_thickness, kernel_sharpness
// (scan unit).
struct StratifierConfig {
  std::string axis;
  std::vector<BinSpec> bins;  // numeric axes; empty = the axis default
  // diameter axis: measure patients by detection-derived diameters instead
  // of ground-truth ones
  bool use_model_diameter = false;
  // slice-thickness default bins differ per acquisition era: "nlst" or "ic"
  std::string slice_convention = "nlst";
  std::string kernel_data_path;  // empty = shipped data file
};

struct StratifyResult {
  std::string axis;
  std::string unit;  // "patient" | "scan"
  // group label -> member ids in input order; labels partition the cohort
  // ("unknown" collects records missing the field, "out_of_range" values
  // beyond the bins)
  std::map<std::string, std::vector<std::string>> groups;
};

StratifyResult stratify(const Cohort& cohort, const StratifierConfig& config);

// Reporting-time union group: stage "1" = "1A" + "1B", appended to the base
// partition (the result is no longer disjoint).
std::map<std::string, std::vector<std::string>> with_stage_composite(
    const StratifyResult& stage_result);

// Reconstruction-kernel class from the shipped per-vendor lists: exact
// match first, whitespace-trimmed second, tiers checked sharpest-first.
// Unknown vendor or kernel -> "unknown".
std::string kernel_sharpness(const std::string& manufacturer, const std::string& kernel,
                             const std::string& data_path = "");

std::vector<BinSpec> default_bins(const std::string& axis,
                                  const std::string& slice_convention = "nlst");

}  // namespace cadeval
