#pragma once
// Cohort data model shared by every analysis module.
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cadeval/geometry.hpp"

namespace cadeval {

using Json = nlohmann::json;

enum class Sex { male, female, unknown };
const char* to_string(Sex s);
Sex sex_from_string(const std::string& s);

struct PatientRecord {
  std::string patient_id;
  bool cancer_status = false;
  std::optional<std::string> stage;  // AJCC6 code, only for cancer patients
  std::optional<double> age;         // years
  Sex sex = Sex::unknown;
  std::string dataset;               // opaque tag, empty = unknown
  std::optional<bool> copd;
  Json attrs = Json::object();       // unparsed fields, kept for stratification
};

struct ScanRecord {
  std::string scan_id;
  std::string patient_id;
  // -1 = closest to diagnosis, -2 = the scan before it, earlier scans -3, ...
  int timepoint = -1;
  std::int64_t acquisition_day = 0;  // per-patient epoch; only differences matter
  std::string manufacturer;
  std::string kernel;
  std::optional<double> slice_thickness;  // mm
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // (z, y, x) mm
  Json attrs = Json::object();
};

struct GtNodule {
  std::string nodule_id;
  std::string scan_id;
  std::string label;  // "malignant" | "benign"
  BoundingBox3D bbox;
  std::optional<std::string> mask_ref;
  std::optional<double> diameter_mm;
  std::optional<double> volume_mm3;
  std::optional<std::string> longitudinal_id;  // links one nodule across timepoints
  Json attrs = Json::object();
};

struct Detection {
  std::string detection_id;
  std::string scan_id;
  double score = 0.0;  // in [0, 1]
  BoundingBox3D bbox;
  std::optional<std::string> mask_ref;
  std::optional<double> diameter_mm;  // derived from the mask
  std::optional<double> volume_mm3;
  Json attrs = Json::object();
};

struct ReaderFinding {
  BoundingBox3D bbox;
  int malignancy_score = 1;  // 1..10
};

struct ReaderAnnotation {
  std::string reader_id;
  std::string scan_id;
  std::vector<ReaderFinding> findings;  // empty = scan read, nothing found
  Json attrs = Json::object();
};

struct Cohort {
  std::vector<PatientRecord> patients;
  std::vector<ScanRecord> scans;
  std::vector<GtNodule> gt_nodules;
  std::vector<Detection> detections;
  std::vector<ReaderAnnotation> annotations;
};

struct Violation {
  std::string kind;    // "duplicate_key" | "dangling_key" | "invariant"
  std::string record;  // e.g. "detection:d42"
  std::string message;
};
using ValidationReport = std::vector<Violation>;

// Violations are data, not failures: returns them all, in input order.
ValidationReport validate_cohort(const Cohort& c);

// Patient aggregation: max detection score; no detections means no evidence
// of malignancy, hence 0.
double patient_score(const std::vector<double>& detection_scores);

std::map<std::string, const ScanRecord*> scan_index(const Cohort& c);
std::map<std::string, const PatientRecord*> patient_index(const Cohort& c);

}  // namespace cadeval
