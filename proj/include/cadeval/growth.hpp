#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cadeval/matching.hpp"

namespace cadeval {

// Exponential-growth doubling time from two (volume, day) observations.
// Equal volumes return +infinity (stable nodule); shrinkage gives a
// negative value. Errors on nonpositive volumes or t1 <= t2.
double vdt(double v2, double v1, double t2, double t1);

// Doublings per year, 365/vdt; an infinite doubling time maps to 0.
double rdt(double vdt_days);

// Denominator convention for percent volume growth. The default divides by
// the later volume v1; the conventional variant divides by the baseline v2.
enum class GrowthDenominator { v1_final, v2_baseline };

double volume_growth(double v2, double v1,
                     GrowthDenominator den = GrowthDenominator::v1_final);

enum class TimeNormalization { per_year, per_day };

struct DeltaMeasures {
  double delta_volume = 0.0;    // mm^3 (per_day: annualized by 365/elapsed)
  double delta_diameter = 0.0;  // mm, always the raw difference
};

DeltaMeasures delta_measures(const LinkedPair& linked,
                             TimeNormalization norm = TimeNormalization::per_year);

// Squared deviation from the sample median; callers must exclude
// non-finite doubling times first.
std::vector<double> vdt_median_centered(const std::vector<double>& vdts);

// Prediction-evolution score p1/normalized(p1-p2): deltas are min-max
// mapped onto [epsilon, 1] across the cohort (all-equal deltas map to 1).
std::vector<double> darcy_growth(const std::vector<double>& p2,
                                 const std::vector<double>& p1,
                                 double epsilon = 1e-6);

enum class Nodcat { small_nodule, indeterminate, large_nodule };
enum class Growcat { A, B, C };

const char* to_string(Nodcat n);
const char* to_string(Growcat g);

// Size category from the baseline volume (<50 / [50,500] / >500 mm^3) and
// growth category from the doubling time (>=600 d or non-growing -> A,
// [400,600) -> B, (0,400) -> C).
std::pair<Nodcat, Growcat> nelson_categorize(double v2_mm3, double vdt_days);

// Diameter-growth alarm at the 1.5 mm threshold (inclusive).
bool lungrads_growth_flag(double delta_diameter_mm);

struct GrowthRecord {
  LinkedPair linked;
  double vdt_days = 0.0;
  double rdt_per_year = 0.0;
  double volume_growth_pct = 0.0;
  double delta_volume = 0.0;
  double delta_diameter = 0.0;
  double darcy = 0.0;
  double vdt_centered = 0.0;  // NaN when vdt is not finite
  Nodcat nodcat = Nodcat::small_nodule;
  Growcat growcat = Growcat::A;
  bool lungrads_flag = false;
};

// All measures per linked pair; median centering and the growth-delta
// normalization are computed across the whole batch.
std::vector<GrowthRecord> build_growth_records(
    const std::vector<LinkedPair>& pairs,
    TimeNormalization norm = TimeNormalization::per_year,
    GrowthDenominator den = GrowthDenominator::v1_final);

// Patient ids whose record (one per patient, from the largest baseline
// nodule) is size-indeterminate at baseline and grew at least 25% under
// the active denominator convention.
std::vector<std::string> nelson_protocol_select(const std::vector<GrowthRecord>& records);

}  // namespace cadeval
