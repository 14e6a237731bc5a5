#include "cadeval/io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "cadeval/error.hpp"

namespace cadeval {
namespace {

[[noreturn]] void fail(const std::string& file, std::size_t line, const std::string& msg) {
  throw input_error(file + ":" + std::to_string(line) + ": " + msg);
}

// One parsed record line.  Accessors pop known fields; whatever is left at
// the end is kept verbatim as the record's attrs.
class Row {
 public:
  Row(Json j, const std::string& file, std::size_t line)
      : j_(std::move(j)), file_(file), line_(line) {
    if (!j_.is_object()) die("record is not an object");
  }

  [[noreturn]] void die(const std::string& msg) const { fail(file_, line_, msg); }
  [[noreturn]] void die_field(const char* k, const std::string& msg) const {
    die("field '" + std::string(k) + "' " + msg);
  }

  bool has(const char* k) const { return j_.contains(k); }

  std::string str(const char* k) {
    const Json& v = req(k);
    if (!v.is_string()) die_field(k, "must be a string");
    return take(k).get<std::string>();
  }
  std::optional<std::string> opt_str(const char* k) {
    if (!has(k)) return std::nullopt;
    return str(k);
  }
  bool boolean(const char* k) {
    const Json& v = req(k);
    if (!v.is_boolean()) die_field(k, "must be a boolean");
    return take(k).get<bool>();
  }
  std::optional<bool> opt_bool(const char* k) {
    if (!has(k)) return std::nullopt;
    return boolean(k);
  }
  std::int64_t integer(const char* k) {
    const Json& v = req(k);
    if (!v.is_number_integer()) die_field(k, "must be an integer");
    return take(k).get<std::int64_t>();
  }
  double number(const char* k) {
    const Json& v = req(k);
    if (!v.is_number()) die_field(k, "must be a number");
    return take(k).get<double>();
  }
  std::optional<double> opt_number(const char* k) {
    if (!has(k)) return std::nullopt;
    return number(k);
  }
  BoundingBox3D bbox(const char* k) {
    const Json& v = req(k);
    if (!v.is_array() || v.size() != 6) die_field(k, "must be [z0,y0,x0,z1,y1,x1]");
    for (const auto& e : v)
      if (!e.is_number_integer()) die_field(k, "must hold integer voxel indices");
    BoundingBox3D b;
    for (int i = 0; i < 3; ++i) b.min[i] = v[i].get<std::int64_t>();
    for (int i = 0; i < 3; ++i) b.max[i] = v[i + 3].get<std::int64_t>();
    take(k);
    return b;
  }
  std::array<double, 3> triple(const char* k, std::array<double, 3> fallback) {
    if (!has(k)) return fallback;
    const Json& v = req(k);
    if (!v.is_array() || v.size() != 3) die_field(k, "must be an array of 3 numbers");
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
      if (!v[i].is_number()) die_field(k, "must be an array of 3 numbers");
      out[i] = v[i].get<double>();
    }
    take(k);
    return out;
  }

  // Fields not claimed by the schema, preserved for stratification.
  Json rest() {
    Json a = Json::object();
    for (auto& [key, value] : j_.items())
      if (!taken_.count(key)) a[key] = value;
    return a;
  }

 private:
  const Json& req(const char* k) const {
    auto it = j_.find(k);
    if (it == j_.end()) die("missing field '" + std::string(k) + "'");
    return *it;
  }
  const Json& take(const char* k) {
    taken_.insert(k);
    return j_.at(k);
  }

  Json j_;
  std::set<std::string> taken_;
  const std::string& file_;
  std::size_t line_;
};

template <class Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail(path, lineno, std::string("malformed record: ") + e.what());
    }
    fn(Row(std::move(j), path, lineno), lineno);
  }
}

// Duplicate-primary-key detector; reports the offending line.
class KeySet {
 public:
  KeySet(const std::string& file, const char* field) : file_(file), field_(field) {}
  void add(const std::string& key, std::size_t line) {
    if (!seen_.insert(key).second)
      fail(file_, line, "duplicate " + field_ + " '" + key + "'");
  }

 private:
  const std::string& file_;
  std::string field_;
  std::set<std::string> seen_;
};

Json bbox_json(const BoundingBox3D& b) {
  return Json::array({b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2]});
}

template <class T>
void set_opt(Json& j, const char* k, const std::optional<T>& v) {
  if (v) j[k] = *v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write " + path);
  return out;
}

}  // namespace

Cohort read_cohort(const CohortPaths& paths) {
  Cohort c;
  if (!paths.patients.empty()) {
    KeySet keys(paths.patients, "patient_id");
    for_each_record(paths.patients, [&](Row r, std::size_t line) {
      PatientRecord p;
      p.patient_id = r.str("patient_id");
      keys.add(p.patient_id, line);
      p.cancer_status = r.boolean("cancer_status");
      p.stage = r.opt_str("stage");
      p.age = r.opt_number("age");
      if (auto s = r.opt_str("sex")) p.sex = sex_from_string(*s);
      p.dataset = r.opt_str("dataset").value_or("");
      p.copd = r.opt_bool("copd");
      p.attrs = r.rest();
      c.patients.push_back(std::move(p));
    });
  }
  if (!paths.scans.empty()) {
    KeySet keys(paths.scans, "scan_id");
    for_each_record(paths.scans, [&](Row r, std::size_t line) {
      ScanRecord s;
      s.scan_id = r.str("scan_id");
      keys.add(s.scan_id, line);
      s.patient_id = r.str("patient_id");
      s.timepoint = static_cast<int>(r.integer("timepoint"));
      s.acquisition_day = r.integer("acquisition_day");
      s.manufacturer = r.opt_str("manufacturer").value_or("");
      s.kernel = r.opt_str("kernel").value_or("");
      s.slice_thickness = r.opt_number("slice_thickness");
      s.spacing = r.triple("spacing", {1.0, 1.0, 1.0});
      s.attrs = r.rest();
      c.scans.push_back(std::move(s));
    });
  }
  if (!paths.gt_nodules.empty()) {
    KeySet keys(paths.gt_nodules, "nodule_id");
    for_each_record(paths.gt_nodules, [&](Row r, std::size_t line) {
      GtNodule g;
      g.nodule_id = r.str("nodule_id");
      keys.add(g.nodule_id, line);
      g.scan_id = r.str("scan_id");
      g.label = r.str("label");
      g.bbox = r.bbox("bbox");
      g.mask_ref = r.opt_str("mask_ref");
      g.diameter_mm = r.opt_number("diameter_mm");
      g.volume_mm3 = r.opt_number("volume_mm3");
      g.longitudinal_id = r.opt_str("longitudinal_id");
      g.attrs = r.rest();
      c.gt_nodules.push_back(std::move(g));
    });
  }
  if (!paths.detections.empty()) {
    KeySet keys(paths.detections, "detection_id");
    for_each_record(paths.detections, [&](Row r, std::size_t line) {
      Detection d;
      d.detection_id = r.str("detection_id");
      keys.add(d.detection_id, line);
      d.scan_id = r.str("scan_id");
      d.score = r.number("score");
      if (!(d.score >= 0.0 && d.score <= 1.0))
        r.die_field("score", "out of range [0,1]");
      d.bbox = r.bbox("bbox");
      d.mask_ref = r.opt_str("mask_ref");
      d.diameter_mm = r.opt_number("diameter_mm");
      d.volume_mm3 = r.opt_number("volume_mm3");
      d.attrs = r.rest();
      c.detections.push_back(std::move(d));
    });
  }
  if (!paths.annotations.empty()) {
    KeySet keys(paths.annotations, "(reader_id, scan_id)");
    for_each_record(paths.annotations, [&](Row r, std::size_t line) {
      ReaderAnnotation a;
      a.reader_id = r.str("reader_id");
      a.scan_id = r.str("scan_id");
      keys.add(a.reader_id + "\x1f" + a.scan_id, line);
      if (r.has("findings")) {
        // parse via a nested Row per finding to reuse the field checks
        Json arr = r.rest()["findings"];
        if (!arr.is_array()) r.die_field("findings", "must be an array");
        for (auto& f : arr) {
          Row fr(std::move(f), paths.annotations, line);
          ReaderFinding rf;
          rf.bbox = fr.bbox("bbox");
          rf.malignancy_score = static_cast<int>(fr.integer("malignancy_score"));
          a.findings.push_back(rf);
        }
        Json rest = r.rest();
        rest.erase("findings");
        a.attrs = rest;
      } else {
        a.attrs = r.rest();
      }
      c.annotations.push_back(std::move(a));
    });
  }
  return c;
}

void write_patients(const std::string& path, const std::vector<PatientRecord>& rows) {
  auto out = open_out(path);
  for (const auto& p : rows) {
    Json j = p.attrs.is_object() ? p.attrs : Json::object();
    j["patient_id"] = p.patient_id;
    j["cancer_status"] = p.cancer_status;
    set_opt(j, "stage", p.stage);
    set_opt(j, "age", p.age);
    if (p.sex != Sex::unknown) j["sex"] = to_string(p.sex);
    if (!p.dataset.empty()) j["dataset"] = p.dataset;
    set_opt(j, "copd", p.copd);
    out << j.dump() << "\n";
  }
}

void write_scans(const std::string& path, const std::vector<ScanRecord>& rows) {
  auto out = open_out(path);
  for (const auto& s : rows) {
    Json j = s.attrs.is_object() ? s.attrs : Json::object();
    j["scan_id"] = s.scan_id;
    j["patient_id"] = s.patient_id;
    j["timepoint"] = s.timepoint;
    j["acquisition_day"] = s.acquisition_day;
    if (!s.manufacturer.empty()) j["manufacturer"] = s.manufacturer;
    if (!s.kernel.empty()) j["kernel"] = s.kernel;
    set_opt(j, "slice_thickness", s.slice_thickness);
    j["spacing"] = Json::array({s.spacing[0], s.spacing[1], s.spacing[2]});
    out << j.dump() << "\n";
  }
}

void write_gt_nodules(const std::string& path, const std::vector<GtNodule>& rows) {
  auto out = open_out(path);
  for (const auto& g : rows) {
    Json j = g.attrs.is_object() ? g.attrs : Json::object();
    j["nodule_id"] = g.nodule_id;
    j["scan_id"] = g.scan_id;
    j["label"] = g.label;
    j["bbox"] = bbox_json(g.bbox);
    set_opt(j, "mask_ref", g.mask_ref);
    set_opt(j, "diameter_mm", g.diameter_mm);
    set_opt(j, "volume_mm3", g.volume_mm3);
    set_opt(j, "longitudinal_id", g.longitudinal_id);
    out << j.dump() << "\n";
  }
}

void write_detections(const std::string& path, const std::vector<Detection>& rows) {
  auto out = open_out(path);
  for (const auto& d : rows) {
    Json j = d.attrs.is_object() ? d.attrs : Json::object();
    j["detection_id"] = d.detection_id;
    j["scan_id"] = d.scan_id;
    j["score"] = d.score;
    j["bbox"] = bbox_json(d.bbox);
    set_opt(j, "mask_ref", d.mask_ref);
    set_opt(j, "diameter_mm", d.diameter_mm);
    set_opt(j, "volume_mm3", d.volume_mm3);
    out << j.dump() << "\n";
  }
}

void write_annotations(const std::string& path, const std::vector<ReaderAnnotation>& rows) {
  auto out = open_out(path);
  for (const auto& a : rows) {
    Json j = a.attrs.is_object() ? a.attrs : Json::object();
    j["reader_id"] = a.reader_id;
    j["scan_id"] = a.scan_id;
    Json fs = Json::array();
    for (const auto& f : a.findings) {
      Json fj = Json::object();
      fj["bbox"] = bbox_json(f.bbox);
      fj["malignancy_score"] = f.malignancy_score;
      fs.push_back(std::move(fj));
    }
    j["findings"] = std::move(fs);
    out << j.dump() << "\n";
  }
}

void write_cohort(const CohortPaths& paths, const Cohort& cohort) {
  if (!paths.patients.empty()) write_patients(paths.patients, cohort.patients);
  if (!paths.scans.empty()) write_scans(paths.scans, cohort.scans);
  if (!paths.gt_nodules.empty()) write_gt_nodules(paths.gt_nodules, cohort.gt_nodules);
  if (!paths.detections.empty()) write_detections(paths.detections, cohort.detections);
  if (!paths.annotations.empty()) write_annotations(paths.annotations, cohort.annotations);
}

MaskContainer read_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing mask header");
  Json h;
  try {
    h = Json::parse(line);
  } catch (const Json::parse_error& e) {
    fail(path, 1, std::string("malformed mask header: ") + e.what());
  }
  MaskContainer m;
  {
    Row r(std::move(h), path, 1);
    auto sh = r.triple("shape", {0, 0, 0});
    for (int i = 0; i < 3; ++i) {
      m.shape[i] = static_cast<std::int64_t>(sh[i]);
      if (m.shape[i] <= 0 || m.shape[i] != sh[i]) r.die_field("shape", "must be positive integers");
    }
    m.spacing = r.triple("spacing_mm", {0, 0, 0});
    for (double sp : m.spacing)
      if (!(sp > 0.0)) r.die_field("spacing_mm", "must be positive");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::int64_t start = 0, length = 0;
    std::string extra;
    if (!(ss >> start >> length) || (ss >> extra))
      fail(path, lineno, "expected 'start length' run");
    if (length <= 0) fail(path, lineno, "run length must be positive");
    m.runs.push_back({start, length});
  }
  canonicalize(m);  // validates bounds; no-op on already-canonical runs
  return m;
}

void write_mask(const std::string& path, const MaskContainer& mask) {
  auto out = open_out(path);
  Json h = Json::object();
  h["shape"] = Json::array({mask.shape[0], mask.shape[1], mask.shape[2]});
  h["spacing_mm"] = Json::array({mask.spacing[0], mask.spacing[1], mask.spacing[2]});
  out << h.dump() << "\n";
  for (const auto& r : mask.runs) out << r.start << " " << r.length << "\n";
}

const MaskContainer& MaskStore::get(const std::string& ref) const {
  auto it = cache_.find(ref);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(ref, read_mask(resolve(ref))).first->second;
}

std::string MaskStore::resolve(const std::string& ref) const {
  std::string name = ref;
  const std::string ext = ".vmask";
  if (name.size() < ext.size() || name.compare(name.size() - ext.size(), ext.size(), ext) != 0)
    name += ext;
  if (root_.empty()) return name;
  return root_ + "/" + name;
}

std::vector<PredRecord> read_predictions(const std::string& path) {
  std::vector<PredRecord> rows;
  KeySet keys(path, "id");
  for_each_record(path, [&](Row r, std::size_t line) {
    PredRecord p;
    p.id = r.str("id");
    keys.add(p.id, line);
    auto label = r.integer("label");
    if (label != 0 && label != 1) r.die_field("label", "must be 0 or 1");
    p.label = static_cast<int>(label);
    Json rest = r.rest();
    auto it = rest.find("scores");
    if (it == rest.end()) r.die("missing field 'scores'");
    if (!it->is_object()) r.die_field("scores", "must be an object of numbers");
    for (auto& [k, v] : it->items()) {
      if (!v.is_number()) r.die_field("scores", "must be an object of numbers");
      p.scores[k] = v.get<double>();
    }
    rest.erase("scores");
    p.attrs = rest;
    rows.push_back(std::move(p));
  });
  return rows;
}

void write_predictions(const std::string& path, const std::vector<PredRecord>& rows) {
  auto out = open_out(path);
  for (const auto& p : rows) {
    Json j = p.attrs.is_object() ? p.attrs : Json::object();
    j["id"] = p.id;
    j["label"] = p.label;
    Json s = Json::object();
    for (const auto& [k, v] : p.scores) s[k] = v;
    j["scores"] = std::move(s);
    out << j.dump() << "\n";
  }
}

}  // namespace cadeval
