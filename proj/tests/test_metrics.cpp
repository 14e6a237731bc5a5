#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cadeval/error.hpp"
#include "cadeval/metrics.hpp"
#include "cadeval/rng.hpp"
#include "oracles.hpp"

using namespace cadeval;

namespace {

// small random classification instance with deliberate score ties
std::pair<std::vector<int>, std::vector<double>> random_instance(Rng& rng,
                                                                 std::size_t n) {
  std::vector<int> labels;
  std::vector<double> scores;
  bool saw0 = false, saw1 = false;
  for (std::size_t i = 0; i < n; ++i) {
    int l = rng.uniform01() < 0.5 ? 0 : 1;
    labels.push_back(l);
    (l ? saw1 : saw0) = true;
    // quantized so ties happen often
    scores.push_back(std::floor(rng.uniform01() * 8.0) / 8.0);
  }
  if (!saw0) labels[0] = 0;
  if (!saw1) labels[labels.size() - 1] = 1;
  return {labels, scores};
}

GtNodule gt(const std::string& id, const std::string& scan, const std::string& label,
            std::int64_t off) {
  GtNodule g;
  g.nodule_id = id;
  g.scan_id = scan;
  g.label = label;
  g.bbox = {{off, 0, 0}, {off + 4, 4, 4}};
  return g;
}

Detection det(const std::string& id, const std::string& scan, double score,
              std::int64_t off) {
  Detection d;
  d.detection_id = id;
  d.scan_id = scan;
  d.score = score;
  d.bbox = {{off, 0, 0}, {off + 4, 4, 4}};
  return d;
}

}  // namespace

TEST_CASE("perfectly separated scores reach full area") {
  RocCurve c = roc({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9});
  CHECK(c.auc == 1.0);
  CHECK(c.n_pos == 2);
  CHECK(c.n_neg == 2);
  CHECK(c.myi.youden_j == 1.0);
}

TEST_CASE("constant scores give half area") {
  RocCurve c = roc({0, 1, 0, 1}, {0.4, 0.4, 0.4, 0.4});
  CHECK(c.auc == 0.5);
  // one tie group: anchor plus a single sweep point at (1,1)
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].fpr == 0.0);
  CHECK(c.points[0].tpr == 0.0);
  CHECK(std::isinf(c.points[0].cutoff));
  CHECK(c.points[1].fpr == 1.0);
  CHECK(c.points[1].tpr == 1.0);
}

TEST_CASE("five-sample fixture: area and best operating point") {
  std::vector<int> labels = {0, 1, 0, 1, 1};
  std::vector<double> scores = {0.2, 0.3, 0.4, 0.6, 0.9};
  RocCurve c = roc(labels, scores);
  CHECK(c.auc == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(c.auc == doctest::Approx(oracle::auc_pairwise(labels, scores)).epsilon(1e-15));
  CHECK(c.myi.cutoff == 0.6);
  CHECK(c.myi.youden_j == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(c.myi.sensitivity == doctest::Approx(2.0 / 3.0));
  CHECK(c.myi.specificity == 1.0);
}

TEST_CASE("roc matches the concordance oracle on random instances") {
  Rng rng(101);
  for (int rep = 0; rep < 200; ++rep) {
    auto [labels, scores] = random_instance(rng, 3 + rng.uniform_index(40));
    RocCurve c = roc(labels, scores);
    double want = oracle::auc_pairwise(labels, scores);
    CHECK(std::fabs(c.auc - want) <= 1e-12);
    CHECK(std::fabs(auc_fast(labels, scores) - want) <= 1e-12);
    // curve structure: anchored, cutoffs strictly descending, monotone
    REQUIRE(!c.points.empty());
    CHECK(c.points[0].fpr == 0.0);
    CHECK(c.points[0].tpr == 0.0);
    CHECK(std::isinf(c.points[0].cutoff));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].cutoff < c.points[i - 1].cutoff);
      CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
      CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
    }
    CHECK(c.points.back().fpr == 1.0);
    CHECK(c.points.back().tpr == 1.0);
  }
}

TEST_CASE("best operating point matches exhaustive maximization") {
  Rng rng(202);
  for (int rep = 0; rep < 100; ++rep) {
    auto [labels, scores] = random_instance(rng, 3 + rng.uniform_index(30));
    RocCurve c = roc(labels, scores);
    oracle::Op want = oracle::best_youden(labels, scores);
    CHECK(c.myi.cutoff == want.cutoff);
    CHECK(c.myi.sensitivity == want.sensitivity);
    CHECK(c.myi.specificity == want.specificity);
    CHECK(c.myi.accuracy == want.accuracy);
    CHECK(c.myi.youden_j == want.youden_j);
    CHECK(c.myi.youden_j == c.myi.sensitivity + c.myi.specificity - 1.0);
  }
}

TEST_CASE("auto flip negates inverted scores and says so") {
  std::vector<int> labels = {0, 1, 0, 1, 1};
  std::vector<double> scores = {0.2, 0.3, 0.4, 0.6, 0.9};
  std::vector<double> neg;
  for (double s : scores) neg.push_back(-s);
  RocCurve as_is = roc(labels, neg);
  CHECK(as_is.auc == doctest::Approx(1.0 / 6.0));
  CHECK_FALSE(as_is.flipped);
  RocCurve flipped = roc(labels, neg, Orientation::auto_flip);
  CHECK(flipped.flipped);
  CHECK(flipped.auc == doctest::Approx(5.0 / 6.0));
  // already-oriented scores stay untouched under auto
  RocCurve keep = roc(labels, scores, Orientation::auto_flip);
  CHECK_FALSE(keep.flipped);
  CHECK(keep.auc == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("single-class input is an error") {
  CHECK_THROWS_AS(roc({1, 1}, {0.1, 0.2}), input_error);
  CHECK_THROWS_AS(roc({0, 0}, {0.1, 0.2}), input_error);
  CHECK_THROWS_AS(roc({}, {}), input_error);
  CHECK_THROWS_AS(auc_fast({1, 1}, {0.5, 0.6}), input_error);
  CHECK_THROWS_AS(roc({1, 0, 1}, {0.5, 0.6}), input_error);  // length mismatch
}

TEST_CASE("perfect detector: full sensitivity at zero false positives") {
  std::vector<GtNodule> g = {gt("g1", "s1", "malignant", 0),
                             gt("g2", "s2", "malignant", 0)};
  std::vector<Detection> d = {det("d1", "s1", 0.9, 0), det("d2", "s2", 0.8, 0)};
  FrocCurve c = froc(pair(g, d));
  REQUIRE(!c.points.empty());
  bool perfect = false;
  for (const auto& p : c.points)
    if (p.fp_per_scan == 0.0 && p.sensitivity == 1.0) perfect = true;
  CHECK(perfect);
  CHECK(c.n_targets == 2);
  CHECK(c.n_scans == 2);
}

TEST_CASE("lowest cutoff recovers the paired fraction") {
  std::vector<GtNodule> g = {gt("g1", "s1", "malignant", 0),
                             gt("g2", "s1", "malignant", 10),
                             gt("g3", "s2", "malignant", 0)};
  std::vector<Detection> d = {det("d1", "s1", 0.9, 0), det("d2", "s2", 0.1, 20)};
  FrocCurve c = froc(pair(g, d));
  CHECK(c.points.back().sensitivity == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("three-scan fixture equals the enumeration route") {
  std::vector<GtNodule> g = {gt("g1", "s1", "malignant", 0),
                             gt("g2", "s2", "malignant", 0)};
  std::vector<Detection> d = {det("d1", "s1", 0.9, 0), det("d2", "s1", 0.4, 20),
                              det("d3", "s2", 0.6, 0), det("d4", "s3", 0.7, 0)};
  PairOptions opt;
  opt.scan_universe = {"s1", "s2", "s3"};
  FrocCurve c = froc(pair(g, d, opt));
  REQUIRE(c.n_scans == 3);
  auto want = oracle::froc_enumerate({{0.9}, {0.6}}, 2, {0.4, 0.7}, 3);
  REQUIRE(c.points.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(c.points[i].cutoff == want[i].cutoff);
    CHECK(c.points[i].sensitivity == doctest::Approx(want[i].sens).epsilon(1e-15));
    CHECK(c.points[i].fp_per_scan == doctest::Approx(want[i].fp).epsilon(1e-15));
  }
}

TEST_CASE("curves from parts equal curves from pairings") {
  Rng rng(33);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<GtNodule> g;
    std::vector<Detection> d;
    PairOptions opt;
    int n_scans = 2 + static_cast<int>(rng.uniform_index(4));
    for (int s = 0; s < n_scans; ++s) {
      std::string scan = "s" + std::to_string(s);
      opt.scan_universe.push_back(scan);
      int n_t = static_cast<int>(rng.uniform_index(3));
      for (int t = 0; t < n_t; ++t)
        g.push_back(gt(scan + "t" + std::to_string(t), scan, "malignant", t * 10));
      int n_d = static_cast<int>(rng.uniform_index(4));
      for (int k = 0; k < n_d; ++k) {
        std::int64_t off = rng.uniform01() < 0.5 && n_t > 0
                               ? 10 * static_cast<std::int64_t>(rng.uniform_index(n_t))
                               : 100 + 10 * k;
        d.push_back(det(scan + "d" + std::to_string(k), scan,
                        std::floor(rng.uniform01() * 16.0) / 16.0, off));
      }
    }
    PairingResult pr = pair(g, d, opt);
    if (pr.target_ids.empty()) continue;
    // rebuild the parts from the pairing by hand
    std::map<std::string, double> best;
    for (const auto& a : pr.assignments) {
      auto [it, fresh] = best.emplace(a.nodule_id, a.score);
      if (!fresh) it->second = std::max(it->second, a.score);
    }
    std::vector<double> hits;
    for (auto& [id, s] : best) hits.push_back(s);
    std::vector<double> fps;
    for (const auto& u : pr.unmatched_detections) fps.push_back(u.score);
    FrocCurve a = froc(pr);
    FrocCurve b = froc_from_parts(hits, static_cast<std::int64_t>(pr.target_ids.size()),
                                  fps, pr.n_scans);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].cutoff == b.points[i].cutoff);
      CHECK(a.points[i].sensitivity == b.points[i].sensitivity);
      CHECK(a.points[i].fp_per_scan == b.points[i].fp_per_scan);
    }
  }
}

TEST_CASE("no targets means no curve") {
  std::vector<GtNodule> g = {gt("g1", "s1", "benign", 0)};
  std::vector<Detection> d = {det("d1", "s1", 0.9, 0)};
  CHECK_THROWS_AS(froc(pair(g, d)), input_error);
  CHECK_THROWS_AS(froc_from_parts({}, 0, {0.5}, 3), input_error);
  CHECK_THROWS_AS(froc_from_parts({0.5}, 1, {}, 0), input_error);
}

TEST_CASE("sensitivity at an exactly achieved rate") {
  FrocCurve c = froc_from_parts({0.9, 0.7}, 4, {0.8, 0.6, 0.5, 0.4}, 2);
  // cutoffs 0.9 .8 .7 .6 .5 .4 -> fp/scan 0 .5 .5 1 1.5 2
  auto [sens, fp] = sensitivity_at_fp(c, 0.5);
  CHECK(fp == 0.5);
  CHECK(sens == 0.5);  // ties at equal fp resolve to the higher sensitivity
  auto [sens2, fp2] = sensitivity_at_fp(c, 2.0);
  CHECK(fp2 == 2.0);
  CHECK(sens2 == 0.5);
}

TEST_CASE("nearest rate wins, ties to the lower rate") {
  FrocCurve c = froc_from_parts({0.9}, 2, {0.8, 0.4}, 2);
  // points: (0, 0.5) at 0.9, (0.5, 0.5) at 0.8, (1.0, 0.5) at 0.4
  auto [sens, fp] = sensitivity_at_fp(c, 0.75);  // 0.5 and 1.0 equally near
  CHECK(fp == 0.5);
  CHECK(sens == 0.5);
  auto [sens3, fp3] = sensitivity_at_fp(c, 10.0);
  CHECK(fp3 == 1.0);
  (void)sens3;
}

TEST_CASE("single-point curve answers every query with itself") {
  FrocCurve c = froc_from_parts({0.9}, 1, {}, 1);
  auto [sens, fp] = sensitivity_at_fp(c, 4.0);
  CHECK(sens == 1.0);
  CHECK(fp == 0.0);
}

TEST_CASE("benchmark rates are the seven doubling steps") {
  CHECK(kCpmFpThresholds ==
        std::array<double, 7>{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0});
}

TEST_CASE("perfect curve scores one, flat curve its level") {
  FrocCurve perfect = froc_from_parts({0.9, 0.8}, 2, {}, 2);
  CHECK(cpm(perfect) == 1.0);
  // sensitivity stuck at 0.8 across the rate range
  FrocCurve flat = froc_from_parts({0.9, 0.9, 0.9, 0.9}, 5,
                                   {0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.15, 0.1}, 1);
  CHECK(cpm(flat) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("piecewise fixture interpolates exactly") {
  // hand-built parts spanning the full rate range with distinct slopes
  std::vector<double> hits = {0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6};
  std::vector<double> fps;
  for (int i = 0; i < 36; ++i) fps.push_back(0.01 + 0.96 * i / 35.0);
  FrocCurve c = froc_from_parts(hits, 10, fps, 4);
  std::vector<oracle::FrocPt> pts;
  for (const auto& p : c.points) pts.push_back({p.fp_per_scan, p.sensitivity, p.cutoff});
  CHECK(std::fabs(cpm(c) - oracle::cpm_interpolate(pts)) <= 1e-12);
  // random parts keep the two routes identical too
  Rng rng(77);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> h, f;
    int nt = 3 + static_cast<int>(rng.uniform_index(6));
    for (int i = 0; i < nt - 1; ++i) h.push_back(rng.uniform01());
    int nf = static_cast<int>(rng.uniform_index(30));
    for (int i = 0; i < nf; ++i) f.push_back(rng.uniform01());
    FrocCurve cc = froc_from_parts(h, nt, f, 2);
    std::vector<oracle::FrocPt> pp;
    for (const auto& p : cc.points) pp.push_back({p.fp_per_scan, p.sensitivity, p.cutoff});
    CHECK(std::fabs(cpm(cc) - oracle::cpm_interpolate(pp)) <= 1e-12);
  }
}

TEST_CASE("one reader pools to the plain patient curve") {
  std::vector<PatientRecord> patients(4);
  std::vector<ScanRecord> scans(4);
  std::vector<ReaderAnnotation> ann;
  std::vector<int> labels;
  std::vector<double> scores;
  for (int i = 0; i < 4; ++i) {
    patients[i].patient_id = "p" + std::to_string(i);
    patients[i].cancer_status = i % 2 == 1;
    scans[i].scan_id = "s" + std::to_string(i);
    scans[i].patient_id = patients[i].patient_id;
    ReaderAnnotation a;
    a.reader_id = "r1";
    a.scan_id = scans[i].scan_id;
    int ms = 2 + 2 * i;
    a.findings.push_back({{{0, 0, 0}, {1, 1, 1}}, ms});
    ann.push_back(a);
    labels.push_back(patients[i].cancer_status ? 1 : 0);
    scores.push_back(static_cast<double>(ms));
  }
  RocCurve pooled = pooled_reader_roc(ann, scans, patients);
  RocCurve direct = roc(labels, scores);
  CHECK(pooled.auc == direct.auc);
  REQUIRE(pooled.points.size() == direct.points.size());
  for (std::size_t i = 0; i < pooled.points.size(); ++i) {
    CHECK(pooled.points[i].fpr == direct.points[i].fpr);
    CHECK(pooled.points[i].tpr == direct.points[i].tpr);
  }
}

TEST_CASE("duplicating a reader leaves the pooled curve unchanged") {
  std::vector<PatientRecord> patients(4);
  std::vector<ScanRecord> scans(4);
  std::vector<ReaderAnnotation> one;
  for (int i = 0; i < 4; ++i) {
    patients[i].patient_id = "p" + std::to_string(i);
    patients[i].cancer_status = i >= 2;
    scans[i].scan_id = "s" + std::to_string(i);
    scans[i].patient_id = patients[i].patient_id;
    ReaderAnnotation a;
    a.reader_id = "r1";
    a.scan_id = scans[i].scan_id;
    if (i != 1) a.findings.push_back({{{0, 0, 0}, {1, 1, 1}}, 3 + i});
    one.push_back(a);
  }
  std::vector<ReaderAnnotation> two = one;
  for (auto a : one) {
    a.reader_id = "r2";
    two.push_back(a);
  }
  RocCurve c1 = pooled_reader_roc(one, scans, patients);
  RocCurve c2 = pooled_reader_roc(two, scans, patients);
  CHECK(c1.auc == c2.auc);
  REQUIRE(c1.points.size() == c2.points.size());
  for (std::size_t i = 0; i < c1.points.size(); ++i) {
    CHECK(c1.points[i].fpr == c2.points[i].fpr);
    CHECK(c1.points[i].tpr == c2.points[i].tpr);
  }
  CHECK(c2.n_pos == 2 * c1.n_pos);
}

TEST_CASE("disjoint readers pool to the union of their pairs") {
  std::vector<PatientRecord> patients(4);
  std::vector<ScanRecord> scans(4);
  for (int i = 0; i < 4; ++i) {
    patients[i].patient_id = "p" + std::to_string(i);
    patients[i].cancer_status = i % 2 == 0;
    scans[i].scan_id = "s" + std::to_string(i);
    scans[i].patient_id = patients[i].patient_id;
  }
  std::vector<ReaderAnnotation> ann;
  std::vector<int> labels;
  std::vector<double> scores;
  for (int i = 0; i < 4; ++i) {
    ReaderAnnotation a;
    a.reader_id = i < 2 ? "r1" : "r2";
    a.scan_id = scans[i].scan_id;
    int ms = i + 2;
    a.findings.push_back({{{0, 0, 0}, {1, 1, 1}}, ms});
    ann.push_back(a);
    labels.push_back(patients[i].cancer_status ? 1 : 0);
    scores.push_back(static_cast<double>(ms));
  }
  RocCurve pooled = pooled_reader_roc(ann, scans, patients);
  RocCurve direct = roc(labels, scores);
  CHECK(pooled.auc == direct.auc);
  CHECK(pooled.n_pos == direct.n_pos);
  CHECK(pooled.n_neg == direct.n_neg);
}

TEST_CASE("annotation on an unknown scan is an error") {
  std::vector<PatientRecord> patients(1);
  patients[0].patient_id = "p0";
  std::vector<ScanRecord> scans;
  ReaderAnnotation a;
  a.reader_id = "r1";
  a.scan_id = "ghost";
  CHECK_THROWS_AS(pooled_reader_roc({a}, scans, patients), input_error);
}

TEST_CASE("correlation endpoints and a fixture") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> nx = {-1, -2, -3, -4, -5};
  CHECK(pearson(x, nx) == doctest::Approx(-1.0).epsilon(1e-15));
  std::vector<double> a = {0.1, 0.4, 0.35, 0.8, 0.95, 0.2, 0.5, 0.65, 0.3, 0.75};
  std::vector<double> b = {1.2, 0.9, 1.4, 2.1, 1.8, 0.7, 1.1, 1.9, 1.0, 1.6};
  // direct two-pass formula
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  CHECK(std::fabs(pearson(a, b) - num / std::sqrt(da * db)) <= 1e-12);
  CHECK_THROWS_AS(pearson({1.0}, {2.0}), input_error);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), input_error);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), input_error);
}
