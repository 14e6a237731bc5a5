#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cadeval/core.hpp"
#include "cadeval/mask.hpp"

namespace cadeval {

struct PairOptions {
  double threshold = 0.1;  // IoU above this pairs a detection to a target
  std::set<std::string> target_labels = {"malignant"};
  // Off by default: overlap is judged on bounding boxes.  When on, both
  // records must carry mask_ref and mask_lookup must resolve them.
  bool use_mask_iou = false;
  std::function<const MaskContainer&(const std::string&)> mask_lookup;
  // Extra scan ids counting toward per-scan denominators (scans that were
  // read but produced neither targets nor detections).
  std::vector<std::string> scan_universe;
};

struct Assignment {
  std::string detection_id;
  std::string nodule_id;
  std::string scan_id;
  double iou = 0.0;
  double score = 0.0;
};

struct UnmatchedDetection {
  std::string detection_id;
  std::string scan_id;
  double score = 0.0;
};

// Audit record: a detection overlapped this target above threshold but was
// assigned to a better-overlapping one.
struct AltOverlap {
  std::string detection_id;
  std::string nodule_id;
  double iou = 0.0;
};

struct PairingResult {
  std::vector<Assignment> assignments;
  std::vector<UnmatchedDetection> unmatched_detections;
  std::vector<std::string> undetected_gt;  // target ids with no assignment
  std::vector<std::string> target_ids;     // all targets considered, input order
  std::vector<AltOverlap> alternatives;
  // scan id -> (n targets, n detections); covers every scan seen in the
  // inputs plus the provided universe
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_scan_counts;
  std::int64_t n_scans = 0;
};

// Greedy per-detection assignment: each detection goes to the target (label
// in target_labels, same scan) of highest IoU above threshold, so several
// detections may share one target and none of them is a false positive.
// Ties on IoU break toward the smaller nodule id.
PairingResult pair(const std::vector<GtNodule>& gt_nodules,
                   const std::vector<Detection>& detections,
                   const PairOptions& options = {});

// One physical nodule observed at both timepoints, with volumes, diameters,
// acquisition days, and max assigned detection score per timepoint (0 when
// the nodule went undetected there).
struct LinkedPair {
  std::string longitudinal_id;
  std::string patient_id;
  std::string label;
  std::string nodule_id_t2, nodule_id_t1;
  double v2 = 0, v1 = 0;  // mm^3 at T-2 / T-1
  double t2 = 0, t1 = 0;  // acquisition days
  double d2 = 0, d1 = 0;  // diameters, mm
  double p2 = 0, p1 = 0;  // detection scores
};

// Joins nodules sharing a longitudinal_id across the T-2 and T-1 scans.
// Records missing a volume or diameter at either timepoint are skipped and
// counted into *n_skipped when provided.  Output sorted by longitudinal_id.
std::vector<LinkedPair> link_longitudinal(const std::vector<GtNodule>& gt_nodules,
                                          const std::vector<ScanRecord>& scans,
                                          const PairingResult& pairing_t1,
                                          const PairingResult& pairing_t2,
                                          std::int64_t* n_skipped = nullptr);

// Largest baseline nodule: max v2, ties to larger v1 then smaller T-2
// nodule id.  Errors on empty input.
const LinkedPair& largest_nodule_at_first_tp(const std::vector<LinkedPair>& pairs);

// A segmented detection candidate as produced per patch by a detector.
struct Finding {
  MaskContainer mask;
  BoundingBox3D bbox;
  double score = 0.0;
  std::array<double, 3> patch_center_mm{0, 0, 0};  // (z, y, x)
};

// Detection cleanup: per finding drop mask components thinner than
// min_diameter_mm (mean axis) and keep the one nearest its patch center;
// then merge intersecting findings into union masks carrying the max score
// and the union's tight bbox.  Output masks are pairwise disjoint.
std::vector<Finding> dedup(const std::vector<Finding>& findings,
                           double min_diameter_mm = 4.0);

// Keeps findings whose mean measured diameter lies in [low_mm, high_mm].
std::vector<Finding> size_window_filter(const std::vector<Finding>& findings,
                                        double low_mm = 4.0, double high_mm = 40.0);

}  // namespace cadeval
