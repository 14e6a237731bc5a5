// cadeval: batch evaluation commands over cohort record files.
//
// Exit codes: 0 success, 1 internal failure, 2 bad input (parse errors,
// validation failures, missing required flags).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cadeval/core.hpp"
#include "cadeval/ensemble.hpp"
#include "cadeval/error.hpp"
#include "cadeval/growth.hpp"
#include "cadeval/io.hpp"
#include "cadeval/matching.hpp"
#include "cadeval/metrics.hpp"
#include "cadeval/parallel.hpp"
#include "cadeval/report.hpp"
#include "cadeval/stats.hpp"
#include "cadeval/subgroup.hpp"
#include "cadeval/synth.hpp"

namespace fs = std::filesystem;
using namespace cadeval;

static const char* kVersion = "cadeval 1.0.0";

namespace {

std::string iso_utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_cmdline(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    std::string a = argv[i];
    if (a.find(' ') != std::string::npos)
      s += '"' + a + '"';
    else
      s += a;
  }
  return s;
}

// Collects input digests while a command runs, then records every output
// file it wrote. finalize() lands manifest.json next to the outputs; the
// timestamp lives only here, so the data files stay byte-reproducible.
class Manifest {
 public:
  Manifest(std::string dir, std::string cmdline, std::uint64_t seed)
      : dir_(std::move(dir)), cmd_(std::move(cmdline)), seed_(seed) {
    if (dir_.empty()) throw input_error("--out directory required");
    fs::create_directories(dir_);
  }

  void add_input(const std::string& path) {
    if (path.empty()) return;
    in_[path] = fnv1a_file_hex(path);
  }

  std::string path(const std::string& name) const { return dir_ + "/" + name; }

  void write_text(const std::string& name, const std::string& content) {
    write_text_file(path(name), content);
    out_[name] = fnv1a_hex(content);
  }

  // for files produced by library writers
  void note_output(const std::string& name) { out_[name] = fnv1a_file_hex(path(name)); }

  void finalize() {
    Json m;
    m["command"] = cmd_;
    m["version"] = kVersion;
    m["inputs"] = in_;
    m["outputs"] = out_;
    m["seed"] = seed_;
    m["threads"] = max_threads();
    m["timestamp"] = iso_utc_now();
    write_text_file(path("manifest.json"), canonical_json(m) + "\n");
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_, cmd_;
  std::uint64_t seed_ = 0;
  Json in_ = Json::object(), out_ = Json::object();
};

struct CohortFlags {
  std::string pred, gt, patients, scans, readers, masks;
};

void add_cohort_flags(CLI::App* c, CohortFlags& f) {
  c->add_option("--pred", f.pred, "detection record file (.ndrec)");
  c->add_option("--gt", f.gt, "ground-truth nodule record file (.ndrec)");
  c->add_option("--patients", f.patients, "patient record file (.ndrec)");
  c->add_option("--scans", f.scans, "scan record file (.ndrec)");
  c->add_option("--readers", f.readers, "reader annotation record file (.ndrec)");
  c->add_option("--masks", f.masks, "directory holding .vmask files");
}

void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) throw input_error(std::string("missing required flag ") + flag);
}

Cohort load_cohort(const CohortFlags& f, Manifest* man) {
  CohortPaths p{f.patients, f.scans, f.gt, f.pred, f.readers};
  if (man) {
    man->add_input(p.patients);
    man->add_input(p.scans);
    man->add_input(p.gt_nodules);
    man->add_input(p.detections);
    man->add_input(p.annotations);
  }
  Cohort c = read_cohort(p);
  ValidationReport rep = validate_cohort(c);
  if (!rep.empty()) {
    for (const auto& v : rep)
      std::cerr << v.kind << " " << v.record << ": " << v.message << "\n";
    throw input_error("cohort validation failed: " + std::to_string(rep.size()) +
                      " violation(s)");
  }
  return c;
}

Json op_json(const OperatingPoint& p) {
  Json j;
  j["cutoff"] = p.cutoff;
  j["sensitivity"] = p.sensitivity;
  j["specificity"] = p.specificity;
  j["accuracy"] = p.accuracy;
  j["youden_j"] = p.youden_j;
  return j;
}

Json boot_json(const BootstrapResult& b) {
  Json j;
  j["n_boot"] = b.n_boot;
  j["seed"] = b.seed;
  j["point_estimate"] = b.point_estimate;
  j["mean"] = b.mean;
  j["ci_low"] = b.ci_low;
  j["ci_high"] = b.ci_high;
  j["n_skipped"] = b.n_skipped;
  return j;
}

Json roc_points_json(const RocCurve& c) {
  Json pts = Json::array();
  for (const auto& p : c.points) {
    Json q;
    q["cutoff"] = p.cutoff;
    q["fpr"] = p.fpr;
    q["tpr"] = p.tpr;
    pts.push_back(q);
  }
  return pts;
}

// AUC over a resample of (labels, scores); undefined when a class vanishes
IndexMetric auc_metric(const std::vector<int>& labels, const std::vector<double>& scores) {
  return [&labels, &scores](const std::vector<std::int32_t>& idx) -> std::optional<double> {
    std::vector<int> l;
    std::vector<double> s;
    l.reserve(idx.size());
    s.reserve(idx.size());
    std::int64_t n_pos = 0;
    for (std::int32_t i : idx) {
      l.push_back(labels[static_cast<std::size_t>(i)]);
      s.push_back(scores[static_cast<std::size_t>(i)]);
      n_pos += l.back();
    }
    if (n_pos == 0 || n_pos == static_cast<std::int64_t>(idx.size())) return std::nullopt;
    return auc_fast(l, s);
  };
}

void maybe_tabular(Manifest& man, const Json& report, const std::string& format) {
  if (format != "tabular") return;
  write_report(report, man.path("report.tsv"), "tabular");
  man.note_output("report.tsv");
}

void check_format(const std::string& format) {
  if (format != "structured" && format != "tabular")
    throw input_error("--format must be structured or tabular");
}

// ---------------------------------------------------------------- roc ----

struct RocArgs {
  CohortFlags io;
  std::string level = "nodule";
  std::string orient = "as_is";
  double threshold = 0.1;
  bool mask_iou = false;
  int boot = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "structured";
};

void collect_mask_inputs(Manifest& man, const MaskStore& store, const Cohort& c,
                         bool gt_too) {
  for (const auto& d : c.detections)
    if (d.mask_ref) man.add_input(store.resolve(*d.mask_ref));
  if (gt_too)
    for (const auto& g : c.gt_nodules)
      if (g.mask_ref) man.add_input(store.resolve(*g.mask_ref));
}

void run_roc(const RocArgs& a, const std::string& cmdline) {
  check_format(a.format);
  if (a.level != "nodule" && a.level != "patient")
    throw input_error("--level must be nodule or patient");
  if (a.orient != "as_is" && a.orient != "auto")
    throw input_error("--orient must be as_is or auto");
  Manifest man(a.out, cmdline, a.seed);
  require_flag(a.io.pred, "--pred");
  Cohort c = load_cohort(a.io, &man);

  std::vector<int> labels;
  std::vector<double> scores;
  if (a.level == "nodule") {
    require_flag(a.io.gt, "--gt");
    PairOptions opt;
    opt.threshold = a.threshold;
    opt.target_labels = {"malignant", "benign"};
    std::optional<MaskStore> store;
    if (a.mask_iou) {
      require_flag(a.io.masks, "--masks");
      store.emplace(a.io.masks);
      opt.use_mask_iou = true;
      opt.mask_lookup = [&store](const std::string& r) -> const MaskContainer& {
        return store->get(r);
      };
      collect_mask_inputs(man, *store, c, true);
    }
    PairingResult pr = pair(c.gt_nodules, c.detections, opt);
    std::map<std::string, double> best;
    for (const auto& as : pr.assignments) {
      auto [it, inserted] = best.emplace(as.nodule_id, as.score);
      if (!inserted) it->second = std::max(it->second, as.score);
    }
    for (const auto& g : c.gt_nodules) {
      labels.push_back(g.label == "malignant" ? 1 : 0);
      auto it = best.find(g.nodule_id);
      scores.push_back(it == best.end() ? 0.0 : it->second);
    }
  } else {
    require_flag(a.io.patients, "--patients");
    require_flag(a.io.scans, "--scans");
    std::map<std::string, std::string> scan_patient;
    for (const auto& s : c.scans) scan_patient[s.scan_id] = s.patient_id;
    std::map<std::string, std::vector<double>> per_patient;
    for (const auto& p : c.patients) per_patient[p.patient_id];
    for (const auto& d : c.detections) {
      auto it = scan_patient.find(d.scan_id);
      if (it == scan_patient.end()) continue;
      per_patient[it->second].push_back(d.score);
    }
    for (const auto& p : c.patients) {
      labels.push_back(p.cancer_status ? 1 : 0);
      scores.push_back(patient_score(per_patient[p.patient_id]));
    }
  }

  Orientation orient = a.orient == "auto" ? Orientation::auto_flip : Orientation::as_is;
  RocCurve curve = roc(labels, scores, orient);
  std::vector<double> eff = scores;
  if (curve.flipped)
    for (double& s : eff) s = -s;

  Json rep;
  rep["command"] = "roc";
  rep["level"] = a.level;
  rep["n_units"] = static_cast<std::int64_t>(labels.size());
  rep["n_pos"] = curve.n_pos;
  rep["n_neg"] = curve.n_neg;
  rep["auc"] = curve.auc;
  rep["flipped"] = curve.flipped;
  rep["myi"] = op_json(curve.myi);
  rep["points"] = roc_points_json(curve);
  if (a.boot > 0) {
    BootstrapResult b = bootstrap(auc_metric(labels, eff),
                                  static_cast<std::int32_t>(labels.size()), a.boot, a.seed);
    rep["bootstrap"] = boot_json(b);
  }

  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  PlotSeries series;
  series.name = "ROC";
  for (const auto& p : curve.points) series.xy.emplace_back(p.fpr, p.tpr);
  PlotMarker mk{1.0 - curve.myi.specificity, curve.myi.sensitivity, "MYI"};
  write_curve_svg(man.path("roc.svg"), "ROC", "false positive rate",
                  "true positive rate", {series}, {mk});
  man.note_output("roc.svg");
  man.finalize();
}

// --------------------------------------------------------- froc / cpm ----

struct FrocArgs {
  CohortFlags io;
  std::vector<std::string> targets;  // default {malignant}
  std::vector<double> fps;           // default {0.5, 1.0}
  double threshold = 0.1;
  bool mask_iou = false;
  int boot = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "structured";
};

// per-scan FROC ingredients for scan-level resampling
struct ScanParts {
  std::vector<double> hits;  // best assigned score per detected target
  std::int64_t n_targets = 0;
  std::vector<double> fps;  // unmatched detection scores
};

std::vector<ScanParts> split_by_scan(const PairingResult& pr) {
  std::map<std::string, ScanParts> by_scan;
  for (const auto& [scan, counts] : pr.per_scan_counts) by_scan[scan].n_targets = counts.first;
  std::map<std::string, std::pair<std::string, double>> best;  // nodule -> (scan, score)
  for (const auto& a : pr.assignments) {
    auto [it, inserted] = best.emplace(a.nodule_id, std::make_pair(a.scan_id, a.score));
    if (!inserted) it->second.second = std::max(it->second.second, a.score);
  }
  for (const auto& [nodule, sc] : best) by_scan[sc.first].hits.push_back(sc.second);
  for (const auto& u : pr.unmatched_detections) by_scan[u.scan_id].fps.push_back(u.score);
  std::vector<ScanParts> parts;
  parts.reserve(by_scan.size());
  for (auto& [scan, p] : by_scan) parts.push_back(std::move(p));
  return parts;
}

std::optional<FrocCurve> curve_of(const std::vector<ScanParts>& parts,
                                  const std::vector<std::int32_t>& idx) {
  std::vector<double> hits, fps;
  std::int64_t n_targets = 0;
  for (std::int32_t i : idx) {
    const ScanParts& p = parts[static_cast<std::size_t>(i)];
    hits.insert(hits.end(), p.hits.begin(), p.hits.end());
    fps.insert(fps.end(), p.fps.begin(), p.fps.end());
    n_targets += p.n_targets;
  }
  if (n_targets == 0) return std::nullopt;
  return froc_from_parts(std::move(hits), n_targets, std::move(fps),
                         static_cast<std::int64_t>(idx.size()));
}

PairingResult froc_pairing(const FrocArgs& a, Manifest& man, Cohort& c) {
  require_flag(a.io.pred, "--pred");
  require_flag(a.io.gt, "--gt");
  c = load_cohort(a.io, &man);
  PairOptions opt;
  opt.threshold = a.threshold;
  if (!a.targets.empty())
    opt.target_labels = std::set<std::string>(a.targets.begin(), a.targets.end());
  for (const auto& s : c.scans) opt.scan_universe.push_back(s.scan_id);
  std::optional<MaskStore> store;
  if (a.mask_iou) {
    require_flag(a.io.masks, "--masks");
    store.emplace(a.io.masks);
    opt.use_mask_iou = true;
    opt.mask_lookup = [&store](const std::string& r) -> const MaskContainer& {
      return store->get(r);
    };
    collect_mask_inputs(man, *store, c, true);
  }
  return pair(c.gt_nodules, c.detections, opt);
}

void run_froc(const FrocArgs& a, const std::string& cmdline) {
  check_format(a.format);
  Manifest man(a.out, cmdline, a.seed);
  Cohort c;
  PairingResult pr = froc_pairing(a, man, c);
  FrocCurve curve = froc(pr);
  std::vector<ScanParts> parts = split_by_scan(pr);
  std::vector<double> fp_targets = a.fps.empty() ? std::vector<double>{0.5, 1.0} : a.fps;

  Json rep;
  rep["command"] = "froc";
  rep["n_scans"] = curve.n_scans;
  rep["n_targets"] = curve.n_targets;
  rep["n_detected"] = curve.n_targets - static_cast<std::int64_t>(pr.undetected_gt.size());
  rep["n_unmatched_detections"] = static_cast<std::int64_t>(pr.unmatched_detections.size());
  rep["cpm"] = cpm(curve);
  Json pts = Json::array();
  for (const auto& p : curve.points) {
    Json q;
    q["cutoff"] = p.cutoff;
    q["fp_per_scan"] = p.fp_per_scan;
    q["sensitivity"] = p.sensitivity;
    pts.push_back(q);
  }
  rep["points"] = pts;

  Json ops = Json::array();
  std::vector<PlotMarker> markers;
  for (double t : fp_targets) {
    auto [sens, fp] = sensitivity_at_fp(curve, t);
    Json op;
    op["target_fp_per_scan"] = t;
    op["fp_per_scan"] = fp;
    op["sensitivity"] = sens;
    if (a.boot > 0) {
      IndexMetric m = [&parts, t](const std::vector<std::int32_t>& idx)
          -> std::optional<double> {
        auto cv = curve_of(parts, idx);
        if (!cv) return std::nullopt;
        return sensitivity_at_fp(*cv, t).first;
      };
      op["bootstrap"] = boot_json(
          bootstrap(m, static_cast<std::int32_t>(parts.size()), a.boot, a.seed));
    }
    ops.push_back(op);
    markers.push_back({fp, sens, format_double(t) + " FP/scan"});
  }
  rep["operating_points"] = ops;
  if (a.boot > 0) {
    IndexMetric m = [&parts](const std::vector<std::int32_t>& idx)
        -> std::optional<double> {
      auto cv = curve_of(parts, idx);
      if (!cv) return std::nullopt;
      return cpm(*cv);
    };
    rep["cpm_bootstrap"] = boot_json(
        bootstrap(m, static_cast<std::int32_t>(parts.size()), a.boot, a.seed));
  }

  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  PlotSeries series;
  series.name = "FROC";
  for (const auto& p : curve.points) series.xy.emplace_back(p.fp_per_scan, p.sensitivity);
  write_curve_svg(man.path("froc.svg"), "FROC", "false positives per scan",
                  "sensitivity", {series}, markers);
  man.note_output("froc.svg");
  man.finalize();
}

void run_cpm(const FrocArgs& a, const std::string& cmdline) {
  check_format(a.format);
  Manifest man(a.out, cmdline, a.seed);
  Cohort c;
  PairingResult pr = froc_pairing(a, man, c);
  FrocCurve curve = froc(pr);

  Json rep;
  rep["command"] = "cpm";
  rep["n_scans"] = curve.n_scans;
  rep["n_targets"] = curve.n_targets;
  rep["cpm"] = cpm(curve);
  Json th = Json::array();
  for (double t : kCpmFpThresholds) {
    Json q;
    q["fp_per_scan"] = t;
    q["sensitivity"] = sensitivity_at_fp(curve, t).first;
    th.push_back(q);
  }
  rep["points"] = th;
  if (a.boot > 0) {
    std::vector<ScanParts> parts = split_by_scan(pr);
    IndexMetric m = [&parts](const std::vector<std::int32_t>& idx)
        -> std::optional<double> {
      auto cv = curve_of(parts, idx);
      if (!cv) return std::nullopt;
      return cpm(*cv);
    };
    rep["bootstrap"] = boot_json(
        bootstrap(m, static_cast<std::int32_t>(parts.size()), a.boot, a.seed));
  }
  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

// ------------------------------------------------------------ compare ----

struct CompareArgs {
  std::string pred_a, pred_b;
  std::string score_a, score_b;
  std::string metric = "auc";
  int boot = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "structured";
};

// resolve which score column to use: an explicit name, or the single
// column shared by every record
std::string pick_score(const std::vector<PredRecord>& rows, const std::string& name,
                       const std::string& file) {
  if (!name.empty()) {
    for (const auto& r : rows)
      if (!r.scores.count(name))
        throw input_error(file + ": record '" + r.id + "' lacks score '" + name + "'");
    return name;
  }
  if (rows.empty()) throw input_error(file + ": no records");
  if (rows.front().scores.size() != 1)
    throw input_error(file + ": several score columns; pick one with --score");
  std::string key = rows.front().scores.begin()->first;
  for (const auto& r : rows)
    if (r.scores.size() != 1 || !r.scores.count(key))
      throw input_error(file + ": inconsistent score columns; pick one with --score");
  return key;
}

void run_compare(const CompareArgs& a, const std::string& cmdline) {
  check_format(a.format);
  if (a.metric != "auc") throw input_error("--metric: only auc is supported");
  require_flag(a.pred_a, "--pred-a");
  require_flag(a.pred_b, "--pred-b");
  Manifest man(a.out, cmdline, a.seed);
  man.add_input(a.pred_a);
  man.add_input(a.pred_b);

  std::vector<PredRecord> ra = read_predictions(a.pred_a);
  std::vector<PredRecord> rb = read_predictions(a.pred_b);
  std::string ka = pick_score(ra, a.score_a, a.pred_a);
  std::string kb = pick_score(rb, a.score_b, a.pred_b);

  std::map<std::string, const PredRecord*> ib;
  for (const auto& r : rb) ib[r.id] = &r;
  if (ra.size() != rb.size())
    throw input_error("compare: prediction sets differ in size");
  std::vector<int> labels;
  std::vector<double> sa, sb;
  std::vector<std::string> ids;
  for (const auto& r : ra) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  std::map<std::string, const PredRecord*> ia;
  for (const auto& r : ra) ia[r.id] = &r;
  for (const auto& id : ids) {
    auto bit = ib.find(id);
    if (bit == ib.end())
      throw input_error("compare: unit '" + id + "' missing from " + a.pred_b);
    const PredRecord* pa = ia[id];
    const PredRecord* pb = bit->second;
    if (pa->label != pb->label)
      throw input_error("compare: label mismatch for unit '" + id + "'");
    labels.push_back(pa->label);
    sa.push_back(pa->scores.at(ka));
    sb.push_back(pb->scores.at(kb));
  }

  auto [ba, bb] = bootstrap_shared(auc_metric(labels, sa), auc_metric(labels, sb),
                                   static_cast<std::int32_t>(labels.size()), a.boot,
                                   a.seed);
  double p_ab = welch_one_sided(ba.replicates, bb.replicates);
  double p_ba = welch_one_sided(bb.replicates, ba.replicates);

  Json rep;
  rep["command"] = "compare";
  rep["metric"] = a.metric;
  rep["n_units"] = static_cast<std::int64_t>(labels.size());
  rep["n_boot"] = a.boot;
  rep["score_a"] = ka;
  rep["score_b"] = kb;
  rep["a"] = boot_json(ba);
  rep["b"] = boot_json(bb);
  rep["delta"] = ba.point_estimate - bb.point_estimate;
  rep["p_a_greater"] = p_ab;
  rep["p_b_greater"] = p_ba;
  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

// ------------------------------------------------------------- growth ----

struct GrowthArgs {
  CohortFlags io;
  std::string denominator = "v1";
  std::string norm = "per_year";
  double threshold = 0.1;
  bool nelson_select = false;
  std::string out;
  std::string format = "structured";
};

Json measure_roc_json(const std::vector<int>& labels, const std::vector<double>& values,
                      bool finite_only) {
  std::vector<int> l;
  std::vector<double> v;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (finite_only && !std::isfinite(values[i])) continue;
    l.push_back(labels[i]);
    v.push_back(values[i]);
  }
  Json j;
  j["n_used"] = static_cast<std::int64_t>(v.size());
  j["n_excluded"] = static_cast<std::int64_t>(values.size() - v.size());
  std::int64_t n_pos = std::accumulate(l.begin(), l.end(), std::int64_t{0});
  if (l.empty() || n_pos == 0 || n_pos == static_cast<std::int64_t>(l.size())) {
    j["auc"] = nullptr;
    return j;
  }
  RocCurve as_is = roc(l, v, Orientation::as_is);
  RocCurve flipped = roc(l, v, Orientation::auto_flip);
  j["auc_as_is"] = as_is.auc;
  j["auc"] = flipped.auc;
  j["flipped"] = flipped.flipped;
  return j;
}

void run_growth(const GrowthArgs& a, const std::string& cmdline) {
  check_format(a.format);
  if (a.denominator != "v1" && a.denominator != "v2")
    throw input_error("--denominator must be v1 or v2");
  if (a.norm != "per_year" && a.norm != "per_day")
    throw input_error("--norm must be per_year or per_day");
  require_flag(a.io.gt, "--gt");
  require_flag(a.io.scans, "--scans");
  Manifest man(a.out, cmdline, 0);
  Cohort c = load_cohort(a.io, &man);

  std::map<std::string, int> scan_tp;
  for (const auto& s : c.scans) scan_tp[s.scan_id] = s.timepoint;
  auto tp_of_scan = [&scan_tp](const std::string& id) {
    auto it = scan_tp.find(id);
    return it == scan_tp.end() ? 0 : it->second;
  };
  std::vector<GtNodule> gt1, gt2;
  for (const auto& g : c.gt_nodules) {
    int tp = tp_of_scan(g.scan_id);
    if (tp == -1) gt1.push_back(g);
    if (tp == -2) gt2.push_back(g);
  }
  std::vector<Detection> det1, det2;
  for (const auto& d : c.detections) {
    int tp = tp_of_scan(d.scan_id);
    if (tp == -1) det1.push_back(d);
    if (tp == -2) det2.push_back(d);
  }
  PairOptions opt;
  opt.threshold = a.threshold;
  opt.target_labels = {"malignant", "benign"};
  PairingResult p1 = pair(gt1, det1, opt);
  PairingResult p2 = pair(gt2, det2, opt);

  std::int64_t n_dropped = 0;
  std::vector<LinkedPair> pairs =
      link_longitudinal(c.gt_nodules, c.scans, p1, p2, &n_dropped);
  if (pairs.empty()) throw input_error("growth: no linked nodule pairs across timepoints");

  GrowthDenominator den = a.denominator == "v1" ? GrowthDenominator::v1_final
                                                : GrowthDenominator::v2_baseline;
  TimeNormalization norm =
      a.norm == "per_year" ? TimeNormalization::per_year : TimeNormalization::per_day;
  std::vector<GrowthRecord> records = build_growth_records(pairs, norm, den);

  std::int64_t n_inf_vdt = 0;
  for (const auto& r : records)
    if (!std::isfinite(r.vdt_days)) ++n_inf_vdt;

  // ranks: 1 = fastest-growing under each ordering; ties keep input order
  auto ranks_desc = [&records](auto key) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return key(records[x]) > key(records[y]);
    });
    std::vector<std::int64_t> rank(records.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      rank[order[i]] = static_cast<std::int64_t>(i) + 1;
    return rank;
  };
  std::vector<std::int64_t> rank_dv =
      ranks_desc([](const GrowthRecord& r) { return r.delta_volume; });
  std::vector<std::int64_t> rank_ratio =
      ranks_desc([](const GrowthRecord& r) { return r.linked.v1 / r.linked.v2; });

  Json rows = Json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const GrowthRecord& r = records[i];
    Json row;
    row["longitudinal_id"] = r.linked.longitudinal_id;
    row["patient_id"] = r.linked.patient_id;
    row["label"] = r.linked.label;
    row["v2_mm3"] = r.linked.v2;
    row["v1_mm3"] = r.linked.v1;
    row["day_t2"] = r.linked.t2;
    row["day_t1"] = r.linked.t1;
    row["d2_mm"] = r.linked.d2;
    row["d1_mm"] = r.linked.d1;
    row["score_t2"] = r.linked.p2;
    row["score_t1"] = r.linked.p1;
    row["vdt_days"] = r.vdt_days;
    row["rdt_per_year"] = r.rdt_per_year;
    row["volume_growth_pct"] = r.volume_growth_pct;
    row["delta_volume_mm3"] = r.delta_volume;
    row["delta_diameter_mm"] = r.delta_diameter;
    row["darcy"] = r.darcy;
    row["vdt_centered"] = r.vdt_centered;
    row["nodcat"] = to_string(r.nodcat);
    row["growcat"] = to_string(r.growcat);
    row["lungrads_flag"] = r.lungrads_flag;
    row["rank_delta_volume"] = rank_dv[i];
    row["rank_volume_ratio"] = rank_ratio[i];
    row["rank_diff"] = rank_dv[i] - rank_ratio[i];
    rows.push_back(row);
  }

  std::vector<int> labels;
  for (const auto& r : records) labels.push_back(r.linked.label == "malignant" ? 1 : 0);
  auto values_of = [&records](auto key) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(key(r));
    return v;
  };
  Json rocs;
  rocs["vdt"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.vdt_days; }), true);
  rocs["vdt_centered"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.vdt_centered; }), true);
  rocs["rdt"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.rdt_per_year; }), false);
  rocs["volume_growth"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.volume_growth_pct; }), false);
  rocs["delta_volume"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.delta_volume; }), false);
  rocs["delta_diameter"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.delta_diameter; }), false);
  rocs["darcy"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.darcy; }), false);
  rocs["score_t1"] = measure_roc_json(
      labels, values_of([](const GrowthRecord& r) { return r.linked.p1; }), false);

  // patient level: the largest baseline nodule represents its patient
  std::map<std::string, std::vector<LinkedPair>> per_patient;
  for (const auto& p : pairs) per_patient[p.patient_id].push_back(p);
  std::map<std::string, const GrowthRecord*> by_lid;
  for (const auto& r : records) by_lid[r.linked.longitudinal_id] = &r;
  std::map<std::string, bool> patient_cancer;
  for (const auto& p : c.patients) patient_cancer[p.patient_id] = p.cancer_status;
  std::vector<const GrowthRecord*> patient_records;
  std::vector<int> patient_labels;
  for (const auto& [pid, plist] : per_patient) {
    const LinkedPair& biggest = largest_nodule_at_first_tp(plist);
    const GrowthRecord* rec = by_lid.at(biggest.longitudinal_id);
    patient_records.push_back(rec);
    auto it = patient_cancer.find(pid);
    patient_labels.push_back(it != patient_cancer.end()
                                 ? (it->second ? 1 : 0)
                                 : (rec->linked.label == "malignant" ? 1 : 0));
  }
  auto patient_values = [&patient_records](auto key) {
    std::vector<double> v;
    for (const GrowthRecord* r : patient_records) v.push_back(key(*r));
    return v;
  };
  Json procs;
  procs["vdt"] = measure_roc_json(
      patient_labels, patient_values([](const GrowthRecord& r) { return r.vdt_days; }),
      true);
  procs["vdt_centered"] = measure_roc_json(
      patient_labels,
      patient_values([](const GrowthRecord& r) { return r.vdt_centered; }), true);
  procs["volume_growth"] = measure_roc_json(
      patient_labels,
      patient_values([](const GrowthRecord& r) { return r.volume_growth_pct; }), false);
  procs["delta_volume"] = measure_roc_json(
      patient_labels, patient_values([](const GrowthRecord& r) { return r.delta_volume; }),
      false);
  procs["darcy"] = measure_roc_json(
      patient_labels, patient_values([](const GrowthRecord& r) { return r.darcy; }),
      false);

  std::int64_t n_flagged = 0;
  for (const auto& r : records)
    if (r.lungrads_flag) ++n_flagged;

  Json rep;
  rep["command"] = "growth";
  rep["denominator"] = a.denominator;
  rep["normalization"] = a.norm;
  rep["n_pairs"] = static_cast<std::int64_t>(pairs.size());
  rep["n_skipped_missing_size"] = n_dropped;
  rep["n_infinite_vdt"] = n_inf_vdt;
  rep["n_lungrads_flagged"] = n_flagged;
  rep["label_source"] = c.patients.empty() ? "nodule_label" : "patient_table";
  rep["rows"] = rows;
  rep["nodule_roc"] = rocs;
  rep["patient_roc"] = procs;
  if (a.nelson_select) {
    std::vector<GrowthRecord> reps;
    for (const GrowthRecord* r : patient_records) reps.push_back(*r);
    Json sel = Json::array();
    for (const auto& pid : nelson_protocol_select(reps)) sel.push_back(pid);
    rep["nelson_selected_patients"] = sel;
  }

  man.write_text("report.json", canonical_json(rep) + "\n");
  write_report(rep, man.path("growth_table.tsv"), "tabular");
  man.note_output("growth_table.tsv");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

// --------------------------------------------------- ensemble fit/apply ----

struct EnsembleArgs {
  std::string tune, pred, weights, classes;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "structured";
};

std::vector<std::string> sorted_columns(const std::vector<PredRecord>& rows,
                                        const std::string& file) {
  if (rows.empty()) throw input_error(file + ": no records");
  std::vector<std::string> cols;
  for (const auto& [k, v] : rows.front().scores) cols.push_back(k);
  for (const auto& r : rows) {
    if (r.scores.size() != cols.size())
      throw input_error(file + ": record '" + r.id + "' has a different score set");
    for (const auto& k : cols)
      if (!r.scores.count(k))
        throw input_error(file + ": record '" + r.id + "' lacks score '" + k + "'");
  }
  return cols;  // map iteration: already sorted
}

// "--classes name[:prefix],name[:prefix],..."; empty prefix = the name
std::vector<std::pair<std::string, std::string>> parse_classes(const std::string& spec) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string token;
  std::stringstream ss(spec);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    auto colon = token.find(':');
    std::string name = colon == std::string::npos ? token : token.substr(0, colon);
    std::string prefix = colon == std::string::npos ? "" : token.substr(colon + 1);
    if (name.empty()) throw input_error("--classes: empty class name in '" + spec + "'");
    if (prefix.empty()) prefix = name;
    out.emplace_back(name, prefix);
  }
  if (out.empty()) throw input_error("--classes: no classes given");
  return out;
}

std::vector<std::vector<int>> class_groups(
    const std::vector<std::string>& cols,
    const std::vector<std::pair<std::string, std::string>>& classes) {
  std::vector<std::vector<int>> groups;
  for (const auto& [name, prefix] : classes) {
    std::vector<int> g;
    for (std::size_t j = 0; j < cols.size(); ++j)
      if (cols[j].rfind(prefix, 0) == 0) g.push_back(static_cast<int>(j));
    if (g.empty())
      throw input_error("--classes: class '" + name + "' matches no score columns");
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<std::vector<double>> score_matrix(const std::vector<PredRecord>& rows,
                                              const std::vector<std::string>& cols) {
  std::vector<std::vector<double>> m(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) m[i][j] = rows[i].scores.at(cols[j]);
  return m;
}

void run_ensemble_fit(const EnsembleArgs& a, const std::string& cmdline) {
  check_format(a.format);
  require_flag(a.tune, "--tune");
  require_flag(a.classes, "--classes");
  Manifest man(a.out, cmdline, a.seed);
  man.add_input(a.tune);
  std::vector<PredRecord> rows = read_predictions(a.tune);
  std::vector<std::string> cols = sorted_columns(rows, a.tune);
  auto classes = parse_classes(a.classes);
  auto groups = class_groups(cols, classes);
  std::vector<std::vector<double>> preds = score_matrix(rows, cols);
  std::vector<int> labels;
  for (const auto& r : rows) labels.push_back(r.label);
  std::vector<std::string> names;
  for (const auto& [name, prefix] : classes) names.push_back(name);

  StackingWeights w =
      fit_stacking(class_mean(preds, groups), labels, a.seed, names);
  write_stacking(man.path("weights.json"), w);
  man.note_output("weights.json");

  Json rep;
  rep["command"] = "ensemble fit";
  rep["n_records"] = static_cast<std::int64_t>(rows.size());
  rep["tuning_auc"] = w.tuning_auc;
  Json jw = Json::object();
  for (std::size_t k = 0; k < w.labels.size(); ++k) jw[w.labels[k]] = w.weights[k];
  rep["weights"] = jw;
  Json jc = Json::object();
  for (std::size_t k = 0; k < classes.size(); ++k) {
    Json members = Json::array();
    for (int j : groups[k]) members.push_back(cols[static_cast<std::size_t>(j)]);
    jc[classes[k].first] = members;
  }
  rep["classes"] = jc;
  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

void run_ensemble_apply(const EnsembleArgs& a, const std::string& cmdline) {
  require_flag(a.pred, "--pred");
  require_flag(a.weights, "--weights");
  Manifest man(a.out, cmdline, 0);
  man.add_input(a.pred);
  man.add_input(a.weights);
  StackingWeights w = read_stacking(a.weights);
  std::vector<PredRecord> rows = read_predictions(a.pred);
  std::vector<std::string> cols = sorted_columns(rows, a.pred);
  // default class layout: every weight label is its own column prefix
  std::vector<std::pair<std::string, std::string>> classes;
  if (!a.classes.empty())
    classes = parse_classes(a.classes);
  else
    for (const auto& l : w.labels) classes.emplace_back(l, l);
  if (classes.size() != w.weights.size())
    throw input_error("ensemble apply: class count does not match the weight file");
  auto groups = class_groups(cols, classes);
  std::vector<double> stacked =
      apply_stacking(w, class_mean(score_matrix(rows, cols), groups));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].scores["stacked"] = stacked[i];
  write_predictions(man.path("predictions.ndrec"), rows);
  man.note_output("predictions.ndrec");
  man.finalize();
}

// -------------------------------------------------- calibrate fit/apply ----

struct CalibrateArgs {
  std::string pred, params, score;
  bool temperature_only = false;
  std::string out;
  std::string format = "structured";
};

double neg_log_likelihood(const std::vector<double>& p, const std::vector<int>& y) {
  double nll = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double q = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
    nll -= y[i] ? std::log(q) : std::log1p(-q);
  }
  return nll / static_cast<double>(p.size());
}

void run_calibrate_fit(const CalibrateArgs& a, const std::string& cmdline) {
  check_format(a.format);
  require_flag(a.pred, "--pred");
  Manifest man(a.out, cmdline, 0);
  man.add_input(a.pred);
  std::vector<PredRecord> rows = read_predictions(a.pred);
  std::string key = pick_score(rows, a.score, a.pred);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& r : rows) {
    scores.push_back(r.scores.at(key));
    labels.push_back(r.label);
  }
  CalibrationParams p = fit_calibration(scores, labels, a.temperature_only);
  write_calibration(man.path("calibration.json"), p);
  man.note_output("calibration.json");

  std::vector<double> after = apply_calibration(p, scores);
  Json rep;
  rep["command"] = "calibrate fit";
  rep["score"] = key;
  rep["n_records"] = static_cast<std::int64_t>(rows.size());
  rep["a"] = p.a;
  rep["b"] = p.b;
  rep["temperature_only"] = p.temperature_only;
  rep["separation_capped"] = p.separation_capped;
  rep["ece_before"] = ece(scores, labels);
  rep["ece_after"] = ece(after, labels);
  rep["nll_before"] = neg_log_likelihood(scores, labels);
  rep["nll_after"] = neg_log_likelihood(after, labels);
  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

void run_calibrate_apply(const CalibrateArgs& a, const std::string& cmdline) {
  require_flag(a.pred, "--pred");
  require_flag(a.params, "--params");
  Manifest man(a.out, cmdline, 0);
  man.add_input(a.pred);
  man.add_input(a.params);
  CalibrationParams p = read_calibration(a.params);
  std::vector<PredRecord> rows = read_predictions(a.pred);
  std::string key = pick_score(rows, a.score, a.pred);
  for (auto& r : rows) r.scores["calibrated"] = apply_calibration(p, r.scores.at(key));
  write_predictions(man.path("predictions.ndrec"), rows);
  man.note_output("predictions.ndrec");
  man.finalize();
}

// -------------------------------------------------------------- dedup ----

struct DedupArgs {
  std::string findings, masks;
  double min_diameter = 4.0;
  std::string out;
  std::string format = "structured";
};

void run_dedup(const DedupArgs& a, const std::string& cmdline) {
  check_format(a.format);
  require_flag(a.findings, "--findings");
  require_flag(a.masks, "--masks");
  Manifest man(a.out, cmdline, 0);
  man.add_input(a.findings);
  MaskStore store(a.masks);

  std::vector<Finding> findings;
  std::string text = read_text_file(a.findings);
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw input_error(a.findings + ":" + std::to_string(lineno) + ": " + e.what());
    }
    auto where = [&](const std::string& msg) {
      return input_error(a.findings + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (!j.is_object() || !j.contains("mask_ref") || !j["mask_ref"].is_string())
      throw where("expected an object with a 'mask_ref' string");
    if (!j.contains("score") || !j["score"].is_number())
      throw where("expected a numeric 'score'");
    Finding f;
    std::string ref = j["mask_ref"].get<std::string>();
    man.add_input(store.resolve(ref));
    f.mask = store.get(ref);
    f.bbox = tight_bbox(f.mask);
    f.score = j["score"].get<double>();
    if (!(f.score >= 0.0 && f.score <= 1.0)) throw where("score out of range [0,1]");
    if (j.contains("patch_center_mm")) {
      const Json& pc = j["patch_center_mm"];
      if (!pc.is_array() || pc.size() != 3) throw where("patch_center_mm must be [z,y,x]");
      for (int k = 0; k < 3; ++k) f.patch_center_mm[static_cast<std::size_t>(k)] =
          pc[static_cast<std::size_t>(k)].get<double>();
    }
    findings.push_back(std::move(f));
  }

  std::vector<Finding> merged = dedup(findings, a.min_diameter);
  fs::create_directories(man.path("masks"));
  Json rows = Json::array();
  for (std::size_t i = 0; i < merged.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "dedup_%04zu", i);
    std::string ref = std::string("masks/") + name + ".vmask";
    write_mask(man.path(ref), merged[i].mask);
    man.note_output(ref);
    Json row;
    row["finding_id"] = name;
    row["mask_ref"] = ref;
    row["score"] = merged[i].score;
    const BoundingBox3D& bb = merged[i].bbox;
    row["bbox"] = {bb.min[0], bb.min[1], bb.min[2], bb.max[0], bb.max[1], bb.max[2]};
    DiameterResult d = diameter_v1(merged[i].mask);
    row["diameter_mm"] = d.mean;
    row["volume_mm3"] = mask_volume(merged[i].mask);
    rows.push_back(row);
  }
  Json rep;
  rep["command"] = "dedup";
  rep["min_diameter_mm"] = a.min_diameter;
  rep["n_input"] = static_cast<std::int64_t>(findings.size());
  rep["n_output"] = static_cast<std::int64_t>(merged.size());
  rep["rows"] = rows;
  man.write_text("report.json", canonical_json(rep) + "\n");
  std::string nd;
  for (const auto& row : rows) nd += canonical_json(row) + "\n";
  man.write_text("findings.ndrec", nd);
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

// -------------------------------------------------------------- measure ----

struct MeasureArgs {
  std::vector<std::string> masks;
  std::string method = "v1";
  std::string out;
  std::string format = "structured";
};

void run_measure(const MeasureArgs& a, const std::string& cmdline) {
  check_format(a.format);
  if (a.masks.empty()) throw input_error("missing required flag --mask");
  if (a.method != "v1" && a.method != "v2")
    throw input_error("--method must be v1 or v2");
  Json rows = Json::array();
  for (const auto& path : a.masks) {
    MaskContainer m = read_mask(path);
    DiameterResult d = a.method == "v1" ? diameter_v1(m) : diameter_v2(m);
    Json row;
    row["mask"] = path;
    row["method"] = a.method;
    row["lax_mm"] = d.lax;
    row["sax_mm"] = d.sax;
    row["mean_mm"] = d.mean;
    row["slice_index"] = d.slice_index;
    row["volume_mm3"] = mask_volume(m);
    row["n_voxels"] = voxel_count(m);
    rows.push_back(row);
  }
  Json rep;
  rep["command"] = "measure";
  rep["rows"] = rows;
  if (a.out.empty()) {
    std::cout << canonical_json(rep) << "\n";
    return;
  }
  Manifest man(a.out, cmdline, 0);
  for (const auto& path : a.masks) man.add_input(path);
  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

// -------------------------------------------------------------- subgroup ----

struct SubgroupArgs {
  CohortFlags io;
  std::string axis;
  std::string slice_convention = "nlst";
  std::string kernel_data;
  bool model_diameter = false;
  std::string out;
  std::string format = "structured";
};

void run_subgroup(const SubgroupArgs& a, const std::string& cmdline) {
  check_format(a.format);
  require_flag(a.axis, "--axis");
  Manifest man(a.out, cmdline, 0);
  Cohort c = load_cohort(a.io, &man);
  StratifierConfig cfg;
  cfg.axis = a.axis;
  cfg.slice_convention = a.slice_convention;
  cfg.use_model_diameter = a.model_diameter;
  cfg.kernel_data_path = a.kernel_data;
  if (!a.kernel_data.empty()) man.add_input(a.kernel_data);
  StratifyResult res = stratify(c, cfg);

  Json groups = Json::object();
  Json rows = Json::array();
  for (const auto& [label, members] : res.groups) {
    Json ids = Json::array();
    for (const auto& id : members) ids.push_back(id);
    groups[label] = ids;
    Json row;
    row["group"] = label;
    row["count"] = static_cast<std::int64_t>(members.size());
    rows.push_back(row);
  }
  Json rep;
  rep["command"] = "subgroup";
  rep["axis"] = res.axis;
  rep["unit"] = res.unit;
  rep["groups"] = groups;
  rep["rows"] = rows;
  if (a.axis == "stage_group") {
    Json comp = Json::object();
    for (const auto& [label, members] : with_stage_composite(res)) {
      Json ids = Json::array();
      for (const auto& id : members) ids.push_back(id);
      comp[label] = ids;
    }
    rep["groups_with_composite"] = comp;
  }
  man.write_text("report.json", canonical_json(rep) + "\n");
  maybe_tabular(man, rep, a.format);
  man.finalize();
}

// -------------------------------------------------------------- synth ----

struct SynthArgs {
  SynthSpec spec;
  std::string out;
};

void run_synth(const SynthArgs& a, const std::string& cmdline) {
  Manifest man(a.out, cmdline, a.spec.seed);
  write_synth_cohort(man.dir(), a.spec);
  man.note_output("patients.ndrec");
  man.note_output("scans.ndrec");
  man.note_output("gt.ndrec");
  man.note_output("detections.ndrec");
  if (a.spec.with_masks) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(man.path("masks")))
      names.push_back("masks/" + e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) man.note_output(n);
  }
  man.finalize();
}

// -------------------------------------------------------------- validate ----

int run_validate(const CohortFlags& f, const std::string& out, const std::string& cmdline) {
  CohortPaths p{f.patients, f.scans, f.gt, f.pred, f.readers};
  Cohort c = read_cohort(p);
  ValidationReport violations = validate_cohort(c);
  Json rows = Json::array();
  for (const auto& v : violations) {
    Json row;
    row["kind"] = v.kind;
    row["record"] = v.record;
    row["message"] = v.message;
    rows.push_back(row);
  }
  Json rep;
  rep["command"] = "validate";
  rep["n_patients"] = static_cast<std::int64_t>(c.patients.size());
  rep["n_scans"] = static_cast<std::int64_t>(c.scans.size());
  rep["n_gt_nodules"] = static_cast<std::int64_t>(c.gt_nodules.size());
  rep["n_detections"] = static_cast<std::int64_t>(c.detections.size());
  rep["n_annotations"] = static_cast<std::int64_t>(c.annotations.size());
  rep["n_violations"] = static_cast<std::int64_t>(violations.size());
  rep["violations"] = rows;
  std::cout << canonical_json(rep) << "\n";
  if (!out.empty()) {
    Manifest man(out, cmdline, 0);
    man.add_input(f.patients);
    man.add_input(f.scans);
    man.add_input(f.gt);
    man.add_input(f.pred);
    man.add_input(f.readers);
    man.write_text("report.json", canonical_json(rep) + "\n");
    man.finalize();
  }
  return violations.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();
  // applied before CLI11 parsing so subcommand callbacks already see it
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    int t = 0;
    if (a == "--threads" && i + 1 < argc)
      t = std::atoi(argv[i + 1]);
    else if (a.rfind("--threads=", 0) == 0)
      t = std::atoi(a.c_str() + 10);
    if (t > 0) set_threads(t);
  }
  std::string cmdline = join_cmdline(argc, argv);
  int exit_code = 0;

  CLI::App app{"deterministic evaluation toolkit for nodule detection and "
               "malignancy prediction"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // so app-level flags parse after the subcommand too
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (overrides CADEVAL_THREADS)");

  RocArgs roc_args;
  CLI::App* roc_cmd = app.add_subcommand("roc", "malignancy ROC with MYI and bootstrap CI");
  add_cohort_flags(roc_cmd, roc_args.io);
  roc_cmd->add_option("--level", roc_args.level, "nodule | patient");
  roc_cmd->add_option("--orient", roc_args.orient, "as_is | auto");
  roc_cmd->add_option("--threshold", roc_args.threshold, "pairing IoU threshold");
  roc_cmd->add_flag("--mask-iou", roc_args.mask_iou, "pair on voxel-mask IoU");
  roc_cmd->add_option("--boot", roc_args.boot, "bootstrap replicate count");
  roc_cmd->add_option("--seed", roc_args.seed, "bootstrap seed");
  roc_cmd->add_option("--out", roc_args.out, "output directory")->required();
  roc_cmd->add_option("--format", roc_args.format, "structured | tabular");
  roc_cmd->callback([&] { run_roc(roc_args, cmdline); });

  FrocArgs froc_args;
  CLI::App* froc_cmd = app.add_subcommand("froc", "detection FROC, CPM, and operating points");
  add_cohort_flags(froc_cmd, froc_args.io);
  froc_cmd->add_option("--target", froc_args.targets, "target GT label (repeatable)");
  froc_cmd->add_option("--fp", froc_args.fps, "FP/scan operating point (repeatable)");
  froc_cmd->add_option("--threshold", froc_args.threshold, "pairing IoU threshold");
  froc_cmd->add_flag("--mask-iou", froc_args.mask_iou, "pair on voxel-mask IoU");
  froc_cmd->add_option("--boot", froc_args.boot, "bootstrap replicate count");
  froc_cmd->add_option("--seed", froc_args.seed, "bootstrap seed");
  froc_cmd->add_option("--out", froc_args.out, "output directory")->required();
  froc_cmd->add_option("--format", froc_args.format, "structured | tabular");
  froc_cmd->callback([&] { run_froc(froc_args, cmdline); });

  FrocArgs cpm_args;
  CLI::App* cpm_cmd = app.add_subcommand("cpm", "competition performance metric");
  add_cohort_flags(cpm_cmd, cpm_args.io);
  cpm_cmd->add_option("--target", cpm_args.targets, "target GT label (repeatable)");
  cpm_cmd->add_option("--threshold", cpm_args.threshold, "pairing IoU threshold");
  cpm_cmd->add_flag("--mask-iou", cpm_args.mask_iou, "pair on voxel-mask IoU");
  cpm_cmd->add_option("--boot", cpm_args.boot, "bootstrap replicate count");
  cpm_cmd->add_option("--seed", cpm_args.seed, "bootstrap seed");
  cpm_cmd->add_option("--out", cpm_args.out, "output directory")->required();
  cpm_cmd->add_option("--format", cpm_args.format, "structured | tabular");
  cpm_cmd->callback([&] { run_cpm(cpm_args, cmdline); });

  CompareArgs cmp_args;
  CLI::App* cmp_cmd = app.add_subcommand(
      "compare", "paired bootstrap + Welch test between two prediction sets");
  cmp_cmd->add_option("--pred-a", cmp_args.pred_a, "first prediction file")->required();
  cmp_cmd->add_option("--pred-b", cmp_args.pred_b, "second prediction file")->required();
  cmp_cmd->add_option("--score-a", cmp_args.score_a, "score column in --pred-a");
  cmp_cmd->add_option("--score-b", cmp_args.score_b, "score column in --pred-b");
  cmp_cmd->add_option("--metric", cmp_args.metric, "comparison metric (auc)");
  cmp_cmd->add_option("--boot", cmp_args.boot, "bootstrap replicate count");
  cmp_cmd->add_option("--seed", cmp_args.seed, "bootstrap seed");
  cmp_cmd->add_option("--out", cmp_args.out, "output directory")->required();
  cmp_cmd->add_option("--format", cmp_args.format, "structured | tabular");
  cmp_cmd->callback([&] { run_compare(cmp_args, cmdline); });

  GrowthArgs growth_args;
  CLI::App* growth_cmd = app.add_subcommand(
      "growth", "longitudinal growth table, measure ROCs, and protocol flags");
  add_cohort_flags(growth_cmd, growth_args.io);
  growth_cmd->add_option("--denominator", growth_args.denominator,
                         "volume-growth denominator: v1 | v2");
  growth_cmd->add_option("--norm", growth_args.norm, "per_year | per_day");
  growth_cmd->add_option("--threshold", growth_args.threshold, "pairing IoU threshold");
  growth_cmd->add_flag("--nelson-select", growth_args.nelson_select,
                       "list patients picked by the indeterminate-size growth rule");
  growth_cmd->add_option("--out", growth_args.out, "output directory")->required();
  growth_cmd->add_option("--format", growth_args.format, "structured | tabular");
  growth_cmd->callback([&] { run_growth(growth_args, cmdline); });

  CLI::App* ens_cmd = app.add_subcommand("ensemble", "score stacking");
  ens_cmd->require_subcommand(1);
  EnsembleArgs ens_fit_args;
  CLI::App* ens_fit = ens_cmd->add_subcommand("fit", "fit simplex stacking weights");
  ens_fit->add_option("--tune", ens_fit_args.tune, "tuning prediction file")->required();
  ens_fit->add_option("--classes", ens_fit_args.classes,
                      "name[:column-prefix],... class spec")->required();
  ens_fit->add_option("--seed", ens_fit_args.seed, "candidate-search seed");
  ens_fit->add_option("--out", ens_fit_args.out, "output directory")->required();
  ens_fit->add_option("--format", ens_fit_args.format, "structured | tabular");
  ens_fit->callback([&] { run_ensemble_fit(ens_fit_args, cmdline); });
  EnsembleArgs ens_apply_args;
  CLI::App* ens_apply = ens_cmd->add_subcommand("apply", "apply stacking weights");
  ens_apply->add_option("--pred", ens_apply_args.pred, "prediction file")->required();
  ens_apply->add_option("--weights", ens_apply_args.weights, "weights file")->required();
  ens_apply->add_option("--classes", ens_apply_args.classes,
                        "class spec when column prefixes differ from weight labels");
  ens_apply->add_option("--out", ens_apply_args.out, "output directory")->required();
  ens_apply->callback([&] { run_ensemble_apply(ens_apply_args, cmdline); });

  CLI::App* cal_cmd = app.add_subcommand("calibrate", "probability calibration");
  cal_cmd->require_subcommand(1);
  CalibrateArgs cal_fit_args;
  CLI::App* cal_fit = cal_cmd->add_subcommand("fit", "fit logistic recalibration");
  cal_fit->add_option("--pred", cal_fit_args.pred, "training prediction file")->required();
  cal_fit->add_option("--score", cal_fit_args.score, "score column");
  cal_fit->add_flag("--temperature-only", cal_fit_args.temperature_only,
                    "fit the slope only, keep the intercept at 0");
  cal_fit->add_option("--out", cal_fit_args.out, "output directory")->required();
  cal_fit->add_option("--format", cal_fit_args.format, "structured | tabular");
  cal_fit->callback([&] { run_calibrate_fit(cal_fit_args, cmdline); });
  CalibrateArgs cal_apply_args;
  CLI::App* cal_apply = cal_cmd->add_subcommand("apply", "apply fitted calibration");
  cal_apply->add_option("--pred", cal_apply_args.pred, "prediction file")->required();
  cal_apply->add_option("--params", cal_apply_args.params, "calibration file")->required();
  cal_apply->add_option("--score", cal_apply_args.score, "score column");
  cal_apply->add_option("--out", cal_apply_args.out, "output directory")->required();
  cal_apply->callback([&] { run_calibrate_apply(cal_apply_args, cmdline); });

  DedupArgs dedup_args;
  CLI::App* dedup_cmd = app.add_subcommand(
      "dedup", "merge overlapping segmented findings, drop sub-size components");
  dedup_cmd->add_option("--findings", dedup_args.findings,
                        "finding record file (mask_ref, score, patch_center_mm)")
      ->required();
  dedup_cmd->add_option("--masks", dedup_args.masks, "mask directory")->required();
  dedup_cmd->add_option("--min-diameter", dedup_args.min_diameter,
                        "component size floor, mm");
  dedup_cmd->add_option("--out", dedup_args.out, "output directory")->required();
  dedup_cmd->add_option("--format", dedup_args.format, "structured | tabular");
  dedup_cmd->callback([&] { run_dedup(dedup_args, cmdline); });

  MeasureArgs measure_args;
  CLI::App* measure_cmd = app.add_subcommand("measure", "diameters and volume of masks");
  measure_cmd->add_option("--mask", measure_args.masks, "mask file (repeatable)");
  measure_cmd->add_option("--method", measure_args.method, "v1 | v2");
  measure_cmd->add_option("--out", measure_args.out, "output directory (default: stdout)");
  measure_cmd->add_option("--format", measure_args.format, "structured | tabular");
  measure_cmd->callback([&] { run_measure(measure_args, cmdline); });

  SubgroupArgs sub_args;
  CLI::App* sub_cmd = app.add_subcommand("subgroup", "cohort stratification");
  add_cohort_flags(sub_cmd, sub_args.io);
  sub_cmd->add_option("--axis", sub_args.axis,
                      "diameter_range | stage_group | sex | age_band | dataset | copd | "
                      "manufacturer | slice_thickness | kernel_sharpness");
  sub_cmd->add_option("--slice-convention", sub_args.slice_convention,
                      "slice-thickness bin set: nlst | ic");
  sub_cmd->add_option("--kernel-data", sub_args.kernel_data,
                      "kernel sharpness table (default: shipped)");
  sub_cmd->add_flag("--model-diameter", sub_args.model_diameter,
                    "bin diameters from detections instead of ground truth");
  sub_cmd->add_option("--out", sub_args.out, "output directory")->required();
  sub_cmd->add_option("--format", sub_args.format, "structured | tabular");
  sub_cmd->callback([&] { run_subgroup(sub_args, cmdline); });

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic screening cohort");
  synth_cmd->add_option("--n", synth_args.spec.n_patients, "patient count");
  synth_cmd->add_option("--prevalence", synth_args.spec.cancer_prevalence,
                        "cancer prevalence");
  synth_cmd->add_option("--seed", synth_args.spec.seed, "generator seed");
  synth_cmd->add_option("--fp-per-scan", synth_args.spec.fp_per_scan,
                        "Poisson mean of false detections per scan");
  synth_cmd->add_flag("--with-masks", synth_args.spec.with_masks, "emit voxel masks");
  synth_cmd->add_option("--radius-min", synth_args.spec.radius_min_mm, "min radius, mm");
  synth_cmd->add_option("--radius-max", synth_args.spec.radius_max_mm, "max radius, mm");
  synth_cmd->add_option("--mal-alpha", synth_args.spec.mal_score_alpha,
                        "malignant score Beta alpha");
  synth_cmd->add_option("--mal-beta", synth_args.spec.mal_score_beta,
                        "malignant score Beta beta");
  synth_cmd->add_option("--ben-alpha", synth_args.spec.ben_score_alpha,
                        "benign score Beta alpha");
  synth_cmd->add_option("--ben-beta", synth_args.spec.ben_score_beta,
                        "benign score Beta beta");
  synth_cmd->add_option("--mal-vdt-median", synth_args.spec.mal_vdt_median_days,
                        "malignant doubling-time median, days");
  synth_cmd->add_option("--ben-vdt-median", synth_args.spec.ben_vdt_median_days,
                        "benign doubling-time median, days");
  synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
  synth_cmd->callback([&] { run_synth(synth_args, cmdline); });

  CohortFlags val_flags;
  std::string val_out;
  CLI::App* val_cmd = app.add_subcommand("validate", "cohort consistency report");
  add_cohort_flags(val_cmd, val_flags);
  val_cmd->add_option("--out", val_out, "output directory (optional)");
  val_cmd->callback([&] { exit_code = run_validate(val_flags, val_out, cmdline); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
