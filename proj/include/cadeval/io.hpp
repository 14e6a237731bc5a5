#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cadeval/core.hpp"
#include "cadeval/mask.hpp"

namespace cadeval {

// File set making up one cohort on disk.  Any path may be empty, in which
// case that table is simply absent from the loaded cohort.
struct CohortPaths {
  std::string patients;
  std::string scans;
  std::string gt_nodules;
  std::string detections;
  std::string annotations;
};

// Record files hold one JSON object per line.  Parse errors, bad field
// values, and duplicate primary keys all raise input_error with a
// "<file>:<line>" prefix so the offending row can be found directly.
Cohort read_cohort(const CohortPaths& paths);

void write_patients(const std::string& path, const std::vector<PatientRecord>& rows);
void write_scans(const std::string& path, const std::vector<ScanRecord>& rows);
void write_gt_nodules(const std::string& path, const std::vector<GtNodule>& rows);
void write_detections(const std::string& path, const std::vector<Detection>& rows);
void write_annotations(const std::string& path, const std::vector<ReaderAnnotation>& rows);
void write_cohort(const CohortPaths& paths, const Cohort& cohort);

// Voxel masks: a one-line JSON header carrying grid shape and voxel
// spacing, followed by "start length" run lines in flat C order.
MaskContainer read_mask(const std::string& path);
void write_mask(const std::string& path, const MaskContainer& mask);

// Lazy mask loader keyed by the mask_ref strings stored on records.
// Refs are resolved relative to a root directory; each mask is read on
// first use and cached.
class MaskStore {
 public:
  explicit MaskStore(std::string root_dir) : root_(std::move(root_dir)) {}
  const MaskContainer& get(const std::string& ref) const;
  std::string resolve(const std::string& ref) const;

 private:
  std::string root_;
  mutable std::map<std::string, MaskContainer> cache_;
};

// Per-unit prediction rows used by the ensembling and calibration
// commands: a unit id, a binary label, and one or more named scores.
struct PredRecord {
  std::string id;
  int label = 0;  // 0 or 1
  std::map<std::string, double> scores;
  Json attrs = Json::object();
};

std::vector<PredRecord> read_predictions(const std::string& path);
void write_predictions(const std::string& path, const std::vector<PredRecord>& rows);

}  // namespace cadeval
