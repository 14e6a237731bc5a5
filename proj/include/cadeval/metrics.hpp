#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "cadeval/core.hpp"
#include "cadeval/matching.hpp"

namespace cadeval {

// Classification rule everywhere: score >= cutoff predicts positive.
struct OperatingPoint {
  double cutoff = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
  double youden_j = 0.0;
};

struct RocPoint {
  double fpr = 0.0, tpr = 0.0, cutoff = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // anchored at (0,0,+inf), cutoffs descending
  double auc = 0.0;
  OperatingPoint myi;  // maximum Youden index; ties resolved to higher specificity
  bool flipped = false;
  std::int64_t n_pos = 0, n_neg = 0;
};

enum class Orientation { as_is, auto_flip };

// Threshold sweep over unique scores with tie grouping; trapezoidal AUC.
// auto_flip negates the scores when auc < 0.5 and marks the curve flipped.
// Throws input_error unless both classes are present.
RocCurve roc(const std::vector<int>& labels, const std::vector<double>& scores,
             Orientation orientation = Orientation::as_is);

// Mann-Whitney concordance via midranks (ties count 1/2); equals the
// trapezoidal AUC. Cheap enough to sit in optimizer inner loops.
double auc_fast(const std::vector<int>& labels, const std::vector<double>& scores);

struct FrocPoint {
  double fp_per_scan = 0.0, sensitivity = 0.0, cutoff = 0.0;
};

struct FrocCurve {
  std::vector<FrocPoint> points;  // cutoffs descending, fp/scan nondecreasing
  std::int64_t n_scans = 0, n_targets = 0;
};

// Sensitivity = fraction of targets with an assigned detection at or above
// the cutoff; FP/scan = mean count of unmatched detections at or above the
// cutoff over every scan in the pairing universe. Errors on zero targets.
FrocCurve froc(const PairingResult& pairing);

// Same curve from pre-aggregated parts: the best assigned score of each
// detected target, the total target count (detected or not), the unmatched
// detection scores, and the scan count. Lets resampling code rebuild curves
// from per-scan pieces without re-pairing.
FrocCurve froc_from_parts(std::vector<double> detected_target_scores,
                          std::int64_t n_targets,
                          std::vector<double> unmatched_scores, std::int64_t n_scans);

// Operating point whose achieved FP/scan is closest to target (ties: lower
// FP, then higher sensitivity). Returns (sensitivity, achieved_fp).
std::pair<double, double> sensitivity_at_fp(const FrocCurve& curve, double target_fp);

extern const std::array<double, 7> kCpmFpThresholds;  // {1/8,...,8}

// Mean sensitivity linearly interpolated at the seven FP/scan thresholds,
// clamped to the achieved FP range.
double cpm(const FrocCurve& curve);

// Pools reader scores: per (reader, patient) the max finding score over the
// patient's annotated scans (0 when nothing was marked), labeled by patient
// cancer status; all pairs concatenated into one curve.
RocCurve pooled_reader_roc(const std::vector<ReaderAnnotation>& annotations,
                           const std::vector<ScanRecord>& scans,
                           const std::vector<PatientRecord>& patients);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cadeval
