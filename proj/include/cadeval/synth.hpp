#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cadeval/core.hpp"
#include "cadeval/mask.hpp"

namespace cadeval {

// Parameters of the synthetic two-timepoint screening cohort.  Detection
// scores are Beta-distributed per class; nodule volume-doubling times are
// log-normal per class; nodules are spheres with exact analytic volumes so
// growth computations can be checked against the generating parameters.
struct SynthSpec {
  std::int64_t n_patients = 100;
  double cancer_prevalence = 0.5;
  double mal_score_alpha = 8.0, mal_score_beta = 2.0;
  double ben_score_alpha = 2.0, ben_score_beta = 8.0;
  double mal_vdt_median_days = 240.0, mal_vdt_sigma = 0.4;
  double ben_vdt_median_days = 1200.0, ben_vdt_sigma = 0.4;
  double radius_min_mm = 3.0, radius_max_mm = 10.0;
  double fp_per_scan = 0.5;  // Poisson mean of false detections per scan
  bool with_masks = false;
  std::uint64_t seed = 1;
};

struct SynthCohort {
  Cohort cohort;
  std::map<std::string, MaskContainer> masks;  // keyed by mask_ref
};

// Deterministic in spec.seed; per-patient counter-derived substreams, so
// output never depends on generation order.  Throws input_error on invalid
// parameters.
SynthCohort synth_cohort(const SynthSpec& spec);

// Writes patients/scans/gt/detections record files (plus masks/ when the
// spec asks for them) under dir, creating it if needed.
void write_synth_cohort(const std::string& dir, const SynthSpec& spec);

}  // namespace cadeval
