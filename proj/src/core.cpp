#include "cadeval/core.hpp"

#include <algorithm>
#include <set>

namespace cadeval {

const char* to_string(Sex s) {
  switch (s) {
    case Sex::male: return "male";
    case Sex::female: return "female";
    default: return "unknown";
  }
}

Sex sex_from_string(const std::string& s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  return Sex::unknown;
}

double patient_score(const std::vector<double>& detection_scores) {
  double best = 0.0;
  for (double s : detection_scores) best = std::max(best, s);
  return best;
}

std::map<std::string, const ScanRecord*> scan_index(const Cohort& c) {
  std::map<std::string, const ScanRecord*> idx;
  for (const auto& s : c.scans) idx.emplace(s.scan_id, &s);
  return idx;
}

std::map<std::string, const PatientRecord*> patient_index(const Cohort& c) {
  std::map<std::string, const PatientRecord*> idx;
  for (const auto& p : c.patients) idx.emplace(p.patient_id, &p);
  return idx;
}

namespace {

void check_bbox(const BoundingBox3D& b, const std::string& record, ValidationReport& out) {
  if (!b.valid())
    out.push_back({"invariant", record, "bbox min corner must be strictly less than max corner"});
}

}  // namespace

ValidationReport validate_cohort(const Cohort& c) {
  ValidationReport out;
  std::set<std::string> patient_ids, scan_ids, nodule_ids, detection_ids;
  // reference checks only apply against tables that were actually loaded
  const bool have_patients = !c.patients.empty();
  const bool have_scans = !c.scans.empty();

  for (const auto& p : c.patients) {
    std::string rec = "patient:" + p.patient_id;
    if (!patient_ids.insert(p.patient_id).second)
      out.push_back({"duplicate_key", rec, "duplicate patient_id"});
    if (p.stage && !p.cancer_status)
      out.push_back({"invariant", rec, "stage present but cancer_status is false"});
    if (p.age && *p.age < 0)
      out.push_back({"invariant", rec, "negative age"});
  }

  std::map<std::string, std::vector<const ScanRecord*>> by_patient;
  for (const auto& s : c.scans) {
    std::string rec = "scan:" + s.scan_id;
    if (!scan_ids.insert(s.scan_id).second)
      out.push_back({"duplicate_key", rec, "duplicate scan_id"});
    if (have_patients && !patient_ids.count(s.patient_id))
      out.push_back({"dangling_key", rec, "patient_id '" + s.patient_id + "' not found"});
    if (s.spacing[0] <= 0 || s.spacing[1] <= 0 || s.spacing[2] <= 0)
      out.push_back({"invariant", rec, "spacing components must be strictly positive"});
    by_patient[s.patient_id].push_back(&s);
  }
  for (auto& [pid, scans] : by_patient) {
    std::sort(scans.begin(), scans.end(), [](const ScanRecord* a, const ScanRecord* b) {
      return a->timepoint < b->timepoint;
    });
    for (std::size_t i = 1; i < scans.size(); ++i) {
      if (scans[i]->timepoint == scans[i - 1]->timepoint)
        out.push_back({"invariant", "scan:" + scans[i]->scan_id,
                       "duplicate timepoint within patient '" + pid + "'"});
      else if (scans[i]->acquisition_day <= scans[i - 1]->acquisition_day)
        out.push_back({"invariant", "scan:" + scans[i]->scan_id,
                       "acquisition_day must strictly increase with timepoint"});
    }
  }

  std::map<std::pair<std::string, std::string>, int> longi;  // (scan, longitudinal_id)
  for (const auto& g : c.gt_nodules) {
    std::string rec = "gt:" + g.nodule_id;
    if (!nodule_ids.insert(g.nodule_id).second)
      out.push_back({"duplicate_key", rec, "duplicate nodule_id"});
    if (have_scans && !scan_ids.count(g.scan_id))
      out.push_back({"dangling_key", rec, "scan_id '" + g.scan_id + "' not found"});
    if (g.label != "malignant" && g.label != "benign")
      out.push_back({"invariant", rec, "label must be 'malignant' or 'benign'"});
    check_bbox(g.bbox, rec, out);
    if (g.volume_mm3 && *g.volume_mm3 <= 0)
      out.push_back({"invariant", rec, "volume must be > 0 when present"});
    if (g.diameter_mm && *g.diameter_mm <= 0)
      out.push_back({"invariant", rec, "diameter must be > 0 when present"});
    if (g.longitudinal_id && ++longi[{g.scan_id, *g.longitudinal_id}] == 2)
      out.push_back({"invariant", rec, "longitudinal_id shared by more than one nodule on scan '" +
                                           g.scan_id + "'"});
  }

  for (const auto& d : c.detections) {
    std::string rec = "detection:" + d.detection_id;
    if (!detection_ids.insert(d.detection_id).second)
      out.push_back({"duplicate_key", rec, "duplicate detection_id"});
    if (have_scans && !scan_ids.count(d.scan_id))
      out.push_back({"dangling_key", rec, "scan_id '" + d.scan_id + "' not found"});
    if (d.score < 0.0 || d.score > 1.0)
      out.push_back({"invariant", rec, "score must be in [0, 1]"});
    check_bbox(d.bbox, rec, out);
  }

  for (const auto& a : c.annotations) {
    std::string rec = "reader:" + a.reader_id + ":" + a.scan_id;
    if (have_scans && !scan_ids.count(a.scan_id))
      out.push_back({"dangling_key", rec, "scan_id '" + a.scan_id + "' not found"});
    for (const auto& f : a.findings) {
      if (f.malignancy_score < 1 || f.malignancy_score > 10)
        out.push_back({"invariant", rec, "malignancy_score must be in 1..10"});
      check_bbox(f.bbox, rec, out);
    }
  }
  return out;
}

}  // namespace cadeval
