#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cadeval/error.hpp"
#include "cadeval/growth.hpp"
#include "cadeval/io.hpp"
#include "cadeval/matching.hpp"
#include "cadeval/metrics.hpp"
#include "cadeval/report.hpp"
#include "cadeval/rng.hpp"
#include "cadeval/synth.hpp"
#include "oracles.hpp"

using namespace cadeval;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "cadeval_io_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void put(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST_CASE("cohort files round trip, extras preserved") {
  fs::path dir = tmpdir("roundtrip");
  Cohort c;
  PatientRecord p;
  p.patient_id = "p1";
  p.cancer_status = true;
  p.stage = "1A";
  p.age = 61.5;
  p.sex = Sex::female;
  p.dataset = "nlst";
  p.copd = true;
  p.attrs["pack_years"] = 30;
  c.patients = {p};
  ScanRecord s;
  s.scan_id = "s1";
  s.patient_id = "p1";
  s.timepoint = -1;
  s.acquisition_day = 42;
  s.manufacturer = "SIEMENS";
  s.kernel = "B50f";
  s.slice_thickness = 1.25;
  s.spacing = {1.25, 0.7, 0.7};
  s.attrs["dose"] = "low";
  c.scans = {s};
  GtNodule g;
  g.nodule_id = "g1";
  g.scan_id = "s1";
  g.label = "malignant";
  g.bbox = {{1, 2, 3}, {4, 5, 6}};
  g.mask_ref = "m_g1";
  g.diameter_mm = 7.5;
  g.volume_mm3 = 221.0;
  g.longitudinal_id = "L1";
  c.gt_nodules = {g};
  Detection d;
  d.detection_id = "d1";
  d.scan_id = "s1";
  d.score = 0.73;
  d.bbox = {{1, 2, 3}, {4, 5, 6}};
  c.detections = {d};
  ReaderAnnotation a;
  a.reader_id = "r1";
  a.scan_id = "s1";
  a.findings = {{{{0, 0, 0}, {2, 2, 2}}, 7}};
  c.annotations = {a};

  CohortPaths paths;
  paths.patients = (dir / "patients.ndrec").string();
  paths.scans = (dir / "scans.ndrec").string();
  paths.gt_nodules = (dir / "gt.ndrec").string();
  paths.detections = (dir / "det.ndrec").string();
  paths.annotations = (dir / "ann.ndrec").string();
  write_cohort(paths, c);
  Cohort back = read_cohort(paths);
  REQUIRE(back.patients.size() == 1);
  CHECK(back.patients[0].patient_id == "p1");
  CHECK(back.patients[0].stage == std::optional<std::string>("1A"));
  CHECK(back.patients[0].sex == Sex::female);
  CHECK(back.patients[0].copd == std::optional<bool>(true));
  CHECK(back.patients[0].attrs["pack_years"] == 30);
  REQUIRE(back.scans.size() == 1);
  CHECK(back.scans[0].spacing == std::array<double, 3>{1.25, 0.7, 0.7});
  CHECK(back.scans[0].attrs["dose"] == "low");
  REQUIRE(back.gt_nodules.size() == 1);
  CHECK(back.gt_nodules[0].bbox.min == std::array<std::int64_t, 3>{1, 2, 3});
  CHECK(back.gt_nodules[0].longitudinal_id == std::optional<std::string>("L1"));
  REQUIRE(back.detections.size() == 1);
  CHECK(back.detections[0].score == 0.73);
  REQUIRE(back.annotations.size() == 1);
  REQUIRE(back.annotations[0].findings.size() == 1);
  CHECK(back.annotations[0].findings[0].malignancy_score == 7);

  // a second write produces the same bytes
  fs::path dir2 = tmpdir("roundtrip2");
  CohortPaths paths2 = paths;
  paths2.patients = (dir2 / "patients.ndrec").string();
  write_patients(paths2.patients, back.patients);
  write_patients((dir2 / "again.ndrec").string(), back.patients);
  CHECK(slurp(dir2 / "patients.ndrec") == slurp(dir2 / "again.ndrec"));
}

TEST_CASE("absent tables stay absent, empty files mean zero rows") {
  fs::path dir = tmpdir("absent");
  put(dir / "det.ndrec", "");
  CohortPaths paths;
  paths.detections = (dir / "det.ndrec").string();
  Cohort c = read_cohort(paths);
  CHECK(c.patients.empty());
  CHECK(c.detections.empty());
  CohortPaths missing;
  missing.detections = (dir / "nope.ndrec").string();
  CHECK_THROWS_AS(read_cohort(missing), input_error);
}

TEST_CASE("bad field values name the field and the line") {
  fs::path dir = tmpdir("badfield");
  put(dir / "det.ndrec",
      R"({"detection_id":"d1","scan_id":"s1","score":0.5,"bbox":[0,0,0,1,1,1]})"
      "\n"
      R"({"detection_id":"d2","scan_id":"s1","score":1.3,"bbox":[0,0,0,1,1,1]})"
      "\n");
  CohortPaths paths;
  paths.detections = (dir / "det.ndrec").string();
  try {
    read_cohort(paths);
    FAIL("expected a parse error");
  } catch (const input_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("score") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);
  }
}

TEST_CASE("malformed json and missing fields are rejected with context") {
  fs::path dir = tmpdir("badjson");
  put(dir / "p.ndrec", "{\"patient_id\":\"p1\",\"cancer_status\":false}\nnot json\n");
  CohortPaths paths;
  paths.patients = (dir / "p.ndrec").string();
  try {
    read_cohort(paths);
    FAIL("expected a parse error");
  } catch (const input_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  put(dir / "p2.ndrec", R"({"patient_id":"p1"})"
                        "\n");
  paths.patients = (dir / "p2.ndrec").string();
  try {
    read_cohort(paths);
    FAIL("expected a missing-field error");
  } catch (const input_error& e) {
    CHECK(std::string(e.what()).find("cancer_status") != std::string::npos);
  }
}

TEST_CASE("duplicate primary keys fail at read time") {
  fs::path dir = tmpdir("dupkey");
  put(dir / "p.ndrec",
      R"({"patient_id":"p1","cancer_status":false})"
      "\n"
      R"({"patient_id":"p1","cancer_status":true})"
      "\n");
  CohortPaths paths;
  paths.patients = (dir / "p.ndrec").string();
  CHECK_THROWS_AS(read_cohort(paths), input_error);
}

TEST_CASE("masks round trip bit-exact and rewrite byte-identical") {
  fs::path dir = tmpdir("mask");
  Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::int64_t> idx;
    for (int i = 0; i < 200; ++i)
      idx.push_back(static_cast<std::int64_t>(rng.uniform_index(6 * 12 * 12)));
    MaskContainer m = mask_from_indices({6, 12, 12}, {1.25, 0.66, 0.66}, std::move(idx));
    fs::path p = dir / ("m" + std::to_string(rep) + ".vmask");
    write_mask(p.string(), m);
    MaskContainer back = read_mask(p.string());
    CHECK(back == m);
    fs::path q = dir / "rewrite.vmask";
    write_mask(q.string(), back);
    CHECK(slurp(p) == slurp(q));
  }
}

TEST_CASE("mask file corruption is caught") {
  fs::path dir = tmpdir("maskbad");
  put(dir / "noheader.vmask", "");
  CHECK_THROWS_AS(read_mask((dir / "noheader.vmask").string()), input_error);
  put(dir / "badshape.vmask", R"({"shape":[0,2,2],"spacing_mm":[1,1,1]})"
                              "\n");
  CHECK_THROWS_AS(read_mask((dir / "badshape.vmask").string()), input_error);
  put(dir / "badspacing.vmask", R"({"shape":[2,2,2],"spacing_mm":[1,-1,1]})"
                                "\n");
  CHECK_THROWS_AS(read_mask((dir / "badspacing.vmask").string()), input_error);
  put(dir / "outofgrid.vmask", R"({"shape":[2,2,2],"spacing_mm":[1,1,1]})"
                               "\n7 2\n");
  CHECK_THROWS_AS(read_mask((dir / "outofgrid.vmask").string()), input_error);
  put(dir / "trailing.vmask", R"({"shape":[2,2,2],"spacing_mm":[1,1,1]})"
                              "\n0 2 9\n");
  CHECK_THROWS_AS(read_mask((dir / "trailing.vmask").string()), input_error);
  put(dir / "zerolen.vmask", R"({"shape":[2,2,2],"spacing_mm":[1,1,1]})"
                             "\n0 0\n");
  CHECK_THROWS_AS(read_mask((dir / "zerolen.vmask").string()), input_error);
}

TEST_CASE("the store resolves refs, appends the extension, and caches") {
  fs::path dir = tmpdir("store");
  MaskContainer m = mask_from_indices({2, 2, 2}, {1, 1, 1}, {0, 1});
  write_mask((dir / "nod.vmask").string(), m);
  MaskStore store(dir.string());
  CHECK(store.resolve("nod") == (dir / "nod.vmask").string());
  CHECK(store.resolve("nod.vmask") == (dir / "nod.vmask").string());
  const MaskContainer& a = store.get("nod");
  const MaskContainer& b = store.get("nod");
  CHECK(&a == &b);  // cached, not re-read
  CHECK(a == m);
  CHECK_THROWS_AS(store.get("missing"), input_error);
}

TEST_CASE("prediction rows round trip and validate") {
  fs::path dir = tmpdir("pred");
  std::vector<PredRecord> rows(2);
  rows[0].id = "n1";
  rows[0].label = 1;
  rows[0].scores = {{"cnn", 0.8}, {"xgb", 0.6}};
  rows[0].attrs["site"] = "a";
  rows[1].id = "n2";
  rows[1].label = 0;
  rows[1].scores = {{"cnn", 0.2}, {"xgb", 0.1}};
  write_predictions((dir / "p.ndrec").string(), rows);
  auto back = read_predictions((dir / "p.ndrec").string());
  REQUIRE(back.size() == 2);
  CHECK(back[0].scores.at("cnn") == 0.8);
  CHECK(back[0].attrs["site"] == "a");
  CHECK(back[1].label == 0);

  put(dir / "badlabel.ndrec", R"({"id":"x","label":2,"scores":{"m":0.5}})"
                              "\n");
  CHECK_THROWS_AS(read_predictions((dir / "badlabel.ndrec").string()), input_error);
  put(dir / "noscores.ndrec", R"({"id":"x","label":1})"
                              "\n");
  CHECK_THROWS_AS(read_predictions((dir / "noscores.ndrec").string()), input_error);
  put(dir / "dupid.ndrec", R"({"id":"x","label":1,"scores":{"m":0.5}})"
                           "\n"
                           R"({"id":"x","label":0,"scores":{"m":0.2}})"
                           "\n");
  CHECK_THROWS_AS(read_predictions((dir / "dupid.ndrec").string()), input_error);
}

TEST_CASE("structured reports are canonical and stable") {
  fs::path dir = tmpdir("report");
  Json rep;
  rep["auc"] = 0.875;
  rep["ci_low"] = 0.81;
  rep["ci_high"] = 0.93;
  rep["operating_points"] = Json::array();
  rep["nan_field"] = std::numeric_limits<double>::quiet_NaN();
  write_report(rep, (dir / "a.json").string(), "structured");
  write_report(rep, (dir / "b.json").string(), "structured");
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  std::string body = slurp(dir / "a.json");
  // keys sorted
  CHECK(body.find("\"auc\"") < body.find("\"ci_high\""));
  CHECK(body.find("\"ci_high\"") < body.find("\"ci_low\""));
  CHECK(body.find("\"nan\"") != std::string::npos);
  Json parsed = Json::parse(body);
  CHECK(parsed["auc"] == 0.875);
}

TEST_CASE("tabular reports flatten the point list") {
  fs::path dir = tmpdir("tabular");
  Json rep;
  rep["auc"] = 0.9;
  rep["points"] = Json::array({Json{{"fpr", 0.0}, {"tpr", 0.0}, {"cutoff", 1.0}},
                               Json{{"fpr", 0.5}, {"tpr", 1.0}, {"cutoff", 0.2}}});
  write_report(rep, (dir / "r.tsv").string(), "tabular");
  std::string body = slurp(dir / "r.tsv");
  // header plus one line per point, columns alphabetical
  CHECK(body == "cutoff\tfpr\ttpr\n1\t0\t0\n0.2\t0.5\t1\n");

  Json rows_rep;
  rows_rep["rows"] = Json::array({Json{{"b", 2}, {"a", 1}}});
  write_report(rows_rep, (dir / "rows.tsv").string(), "tabular");
  CHECK(slurp(dir / "rows.tsv") == "a\tb\n1\t2\n");
  CHECK_THROWS_AS(write_report(Json{{"x", 1}}, (dir / "no.tsv").string(), "tabular"),
                  input_error);
  CHECK_THROWS_AS(write_report(rep, (dir / "no.json").string(), "yaml"), input_error);
}

TEST_CASE("number formatting is locale-proof and round-trips doubles") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0 / 3.0) == "0.333333333333");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  std::string nan_s = format_double(std::numeric_limits<double>::quiet_NaN());
  CHECK(nan_s == "nan");
  CHECK(fnv1a_hex("") == fnv1a_hex(""));
  CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
}

TEST_CASE("generated cohorts are deterministic in the seed") {
  fs::path a = tmpdir("syntha");
  fs::path b = tmpdir("synthb");
  SynthSpec spec;
  spec.n_patients = 40;
  spec.seed = 9;
  spec.with_masks = true;
  write_synth_cohort(a.string(), spec);
  write_synth_cohort(b.string(), spec);
  for (const char* f : {"patients.ndrec", "scans.ndrec", "gt.ndrec", "detections.ndrec"})
    CHECK(slurp(a / f) == slurp(b / f));
  // mask directories match file for file
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a / "masks"))
    names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  CHECK(!names.empty());
  for (const auto& n : names) CHECK(slurp(a / "masks" / n) == slurp(b / "masks" / n));

  SynthSpec other = spec;
  other.seed = 10;
  fs::path c = tmpdir("synthc");
  write_synth_cohort(c.string(), other);
  CHECK(slurp(a / "detections.ndrec") != slurp(c / "detections.ndrec"));
}

TEST_CASE("generated cohorts validate cleanly and obey the spec knobs") {
  SynthSpec spec;
  spec.n_patients = 60;
  spec.cancer_prevalence = 0.4;
  spec.seed = 4;
  SynthCohort sc = synth_cohort(spec);
  CHECK(validate_cohort(sc.cohort).empty());
  CHECK(static_cast<std::int64_t>(sc.cohort.patients.size()) == 60);
  CHECK(sc.cohort.scans.size() == 120);  // two timepoints each
  for (const auto& g : sc.cohort.gt_nodules) {
    CHECK(g.volume_mm3.has_value());
    CHECK(g.diameter_mm.has_value());
    CHECK(g.longitudinal_id.has_value());
  }
  CHECK_THROWS_AS(synth_cohort(SynthSpec{.n_patients = 0}), input_error);
  SynthSpec bad;
  bad.cancer_prevalence = 1.5;
  CHECK_THROWS_AS(synth_cohort(bad), input_error);
}

TEST_CASE("detection scores reproduce the generating separability") {
  SynthSpec spec;
  spec.n_patients = 20000;
  spec.seed = 12;
  spec.fp_per_scan = 0.3;
  SynthCohort sc = synth_cohort(spec);
  // nodule-level: best assigned detection score per ground-truth nodule
  PairOptions opt;
  opt.target_labels = {"malignant", "benign"};
  PairingResult pr = pair(sc.cohort.gt_nodules, sc.cohort.detections, opt);
  std::map<std::string, double> best;
  for (const auto& a : pr.assignments) {
    auto [it, fresh] = best.emplace(a.nodule_id, a.score);
    if (!fresh) it->second = std::max(it->second, a.score);
  }
  std::map<std::string, std::string> label_of;
  for (const auto& g : sc.cohort.gt_nodules) label_of[g.nodule_id] = g.label;
  std::vector<int> labels;
  std::vector<double> scores;
  for (const auto& g : sc.cohort.gt_nodules) {
    labels.push_back(g.label == "malignant" ? 1 : 0);
    auto it = best.find(g.nodule_id);
    scores.push_back(it == best.end() ? 0.0 : it->second);
  }
  double emp = auc_fast(labels, scores);
  double truth = oracle::beta_auc_exact(8, 2, 2, 8);
  CHECK(std::fabs(emp - truth) <= 0.01);
}

TEST_CASE("doubling times reproduce the generating median") {
  SynthSpec spec;
  spec.n_patients = 4000;
  spec.seed = 21;
  spec.mal_vdt_median_days = 365.0;
  SynthCohort sc = synth_cohort(spec);
  PairingResult empty;
  auto linked = link_longitudinal(sc.cohort.gt_nodules, sc.cohort.scans, empty, empty);
  std::map<std::string, bool> cancer;
  for (const auto& p : sc.cohort.patients) cancer[p.patient_id] = p.cancer_status;
  std::vector<double> vdts;
  for (const auto& lp : linked)
    if (cancer[lp.patient_id]) vdts.push_back(vdt(lp.v2, lp.v1, lp.t2, lp.t1));
  REQUIRE(vdts.size() > 100);
  std::sort(vdts.begin(), vdts.end());
  double med = vdts[vdts.size() / 2];
  CHECK(med > 365.0 * 0.95);
  CHECK(med < 365.0 * 1.05);
}
