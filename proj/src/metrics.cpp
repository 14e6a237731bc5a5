#include "cadeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cadeval/error.hpp"

namespace cadeval {

const std::array<double, 7> kCpmFpThresholds = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

namespace {

RocCurve roc_as_is(const std::vector<int>& labels, const std::vector<double>& scores) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  for (int l : labels) (l ? c.n_pos : c.n_neg)++;
  if (c.n_pos == 0 || c.n_neg == 0)
    throw input_error("roc: both classes must be present");
  const double np = static_cast<double>(c.n_pos), nn = static_cast<double>(c.n_neg);
  const double total = np + nn;

  c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  c.myi = {std::numeric_limits<double>::infinity(), 0.0, 1.0, nn / total, 0.0};

  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  double auc = 0.0;
  while (i < n) {
    const double cut = scores[order[i]];
    std::int64_t dtp = 0, dfp = 0;
    while (i < n && scores[order[i]] == cut) {  // tie group
      (labels[order[i]] ? dtp : dfp)++;
      ++i;
    }
    // trapezoid over the tie block handles the diagonal tie segment
    auc += (static_cast<double>(dfp) / nn) *
           (static_cast<double>(tp) / np + 0.5 * static_cast<double>(dtp) / np);
    tp += dtp;
    fp += dfp;
    RocPoint pt{static_cast<double>(fp) / nn, static_cast<double>(tp) / np, cut};
    c.points.push_back(pt);
    OperatingPoint op;
    op.cutoff = cut;
    op.sensitivity = pt.tpr;
    op.specificity = 1.0 - pt.fpr;
    op.accuracy = (static_cast<double>(tp) + (nn - static_cast<double>(fp))) / total;
    op.youden_j = op.sensitivity + op.specificity - 1.0;
    if (op.youden_j > c.myi.youden_j ||
        (op.youden_j == c.myi.youden_j && op.specificity > c.myi.specificity))
      c.myi = op;
  }
  c.auc = auc;
  return c;
}

}  // namespace

RocCurve roc(const std::vector<int>& labels, const std::vector<double>& scores,
             Orientation orientation) {
  if (labels.size() != scores.size())
    throw input_error("roc: labels and scores differ in length");
  if (labels.empty()) throw input_error("roc: empty input");
  RocCurve c = roc_as_is(labels, scores);
  if (orientation == Orientation::auto_flip && c.auc < 0.5) {
    std::vector<double> neg(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) neg[i] = -scores[i];
    c = roc_as_is(labels, neg);
    c.flipped = true;
  }
  return c;
}

double auc_fast(const std::vector<int>& labels, const std::vector<double>& scores) {
  const std::size_t n = labels.size();
  if (n != scores.size()) throw input_error("auc: labels and scores differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0, n_neg = 0, rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j + 1);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j;
  }
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw input_error("auc: both classes must be present");
  return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

FrocCurve froc(const PairingResult& pairing) {
  // per target, the best assigned score; per cutoff we then just count
  std::map<std::string, double> best;
  for (const auto& a : pairing.assignments) {
    auto [it, inserted] = best.emplace(a.nodule_id, a.score);
    if (!inserted) it->second = std::max(it->second, a.score);
  }
  std::vector<double> hit_scores;
  hit_scores.reserve(best.size());
  for (const auto& [id, s] : best) hit_scores.push_back(s);

  std::vector<double> fp_scores;
  fp_scores.reserve(pairing.unmatched_detections.size());
  for (const auto& u : pairing.unmatched_detections) fp_scores.push_back(u.score);

  return froc_from_parts(std::move(hit_scores),
                         static_cast<std::int64_t>(pairing.target_ids.size()),
                         std::move(fp_scores), pairing.n_scans);
}

FrocCurve froc_from_parts(std::vector<double> detected_target_scores,
                          std::int64_t n_targets,
                          std::vector<double> unmatched_scores, std::int64_t n_scans) {
  FrocCurve c;
  c.n_targets = n_targets;
  c.n_scans = n_scans;
  if (c.n_targets == 0) throw input_error("froc: no ground-truth targets");
  if (c.n_scans == 0) throw input_error("froc: empty scan universe");

  std::vector<double>& hit_scores = detected_target_scores;
  std::sort(hit_scores.begin(), hit_scores.end());
  std::vector<double>& fp_scores = unmatched_scores;
  std::sort(fp_scores.begin(), fp_scores.end());

  std::vector<double> cutoffs;
  cutoffs.reserve(hit_scores.size() + fp_scores.size());
  cutoffs.insert(cutoffs.end(), hit_scores.begin(), hit_scores.end());
  cutoffs.insert(cutoffs.end(), fp_scores.begin(), fp_scores.end());
  std::sort(cutoffs.begin(), cutoffs.end(), std::greater<>());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());

  for (double cut : cutoffs) {
    auto hits = hit_scores.end() - std::lower_bound(hit_scores.begin(), hit_scores.end(), cut);
    auto fps = fp_scores.end() - std::lower_bound(fp_scores.begin(), fp_scores.end(), cut);
    c.points.push_back({static_cast<double>(fps) / static_cast<double>(c.n_scans),
                        static_cast<double>(hits) / static_cast<double>(c.n_targets), cut});
  }
  return c;
}

std::pair<double, double> sensitivity_at_fp(const FrocCurve& curve, double target_fp) {
  if (curve.points.empty()) throw input_error("sensitivity_at_fp: empty curve");
  const FrocPoint* best = &curve.points.front();
  for (const auto& p : curve.points) {
    const double d = std::abs(p.fp_per_scan - target_fp);
    const double bd = std::abs(best->fp_per_scan - target_fp);
    if (d < bd ||
        (d == bd && (p.fp_per_scan < best->fp_per_scan ||
                     (p.fp_per_scan == best->fp_per_scan &&
                      p.sensitivity > best->sensitivity))))
      best = &p;
  }
  return {best->sensitivity, best->fp_per_scan};
}

double cpm(const FrocCurve& curve) {
  if (curve.points.empty()) throw input_error("cpm: empty curve");
  // upper envelope: max sensitivity at each distinct fp/scan, fp ascending
  std::vector<std::pair<double, double>> env;
  for (const auto& p : curve.points) {
    if (!env.empty() && env.back().first == p.fp_per_scan)
      env.back().second = std::max(env.back().second, p.sensitivity);
    else
      env.emplace_back(p.fp_per_scan, p.sensitivity);
  }
  std::sort(env.begin(), env.end());
  auto interp = [&](double x) {
    if (x <= env.front().first) return env.front().second;
    if (x >= env.back().first) return env.back().second;
    auto hi = std::lower_bound(env.begin(), env.end(), std::make_pair(x, -1.0));
    auto lo = hi - 1;
    if (hi->first == x) return hi->second;
    const double w = (x - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
  };
  double sum = 0.0;
  for (double t : kCpmFpThresholds) sum += interp(t);
  return sum / static_cast<double>(kCpmFpThresholds.size());
}

RocCurve pooled_reader_roc(const std::vector<ReaderAnnotation>& annotations,
                           const std::vector<ScanRecord>& scans,
                           const std::vector<PatientRecord>& patients) {
  std::map<std::string, const ScanRecord*> scan_by_id;
  for (const auto& s : scans) scan_by_id.emplace(s.scan_id, &s);
  std::map<std::string, bool> label_by_patient;
  for (const auto& p : patients) label_by_patient.emplace(p.patient_id, p.cancer_status);

  // (reader, patient) -> max finding score over the patient's annotated scans
  std::map<std::pair<std::string, std::string>, double> pooled;
  for (const auto& a : annotations) {
    auto sit = scan_by_id.find(a.scan_id);
    if (sit == scan_by_id.end())
      throw input_error("annotation references unknown scan " + a.scan_id);
    const std::string& pid = sit->second->patient_id;
    if (!label_by_patient.count(pid))
      throw input_error("scan " + a.scan_id + " references unknown patient " + pid);
    double& slot = pooled[{a.reader_id, pid}];  // 0 when nothing marked
    for (const auto& f : a.findings)
      slot = std::max(slot, static_cast<double>(f.malignancy_score));
  }

  std::vector<int> labels;
  std::vector<double> scores;
  labels.reserve(pooled.size());
  scores.reserve(pooled.size());
  for (const auto& [key, score] : pooled) {
    labels.push_back(label_by_patient.at(key.second) ? 1 : 0);
    scores.push_back(score);
  }
  return roc(labels, scores);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw input_error("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw input_error("pearson: need at least 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw input_error("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace cadeval
