#include "cadeval/matching.hpp"

#include <algorithm>
#include <cmath>

#include "cadeval/error.hpp"
#include "cadeval/geometry.hpp"

namespace cadeval {
namespace {

double pair_iou(const Detection& d, const GtNodule& g, const PairOptions& opt) {
  if (!opt.use_mask_iou) return iou(d.bbox, g.bbox);
  if (!opt.mask_lookup) throw input_error("mask IoU pairing requires a mask lookup");
  if (!d.mask_ref) throw input_error("detection " + d.detection_id + " has no mask_ref");
  if (!g.mask_ref) throw input_error("nodule " + g.nodule_id + " has no mask_ref");
  return mask_iou(opt.mask_lookup(*d.mask_ref), opt.mask_lookup(*g.mask_ref));
}

struct DsuVec {
  std::vector<int> parent;
  explicit DsuVec(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

PairingResult pair(const std::vector<GtNodule>& gt_nodules,
                   const std::vector<Detection>& detections,
                   const PairOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0))
    throw input_error("pairing threshold must lie in (0,1)");

  PairingResult res;
  std::map<std::string, std::vector<const GtNodule*>> targets_by_scan;
  for (const auto& g : gt_nodules) {
    res.per_scan_counts.emplace(g.scan_id, std::make_pair(0, 0));
    if (!options.target_labels.count(g.label)) continue;
    res.target_ids.push_back(g.nodule_id);
    targets_by_scan[g.scan_id].push_back(&g);
    res.per_scan_counts[g.scan_id].first++;
  }
  for (const auto& d : detections) {
    res.per_scan_counts.emplace(d.scan_id, std::make_pair(0, 0));
    res.per_scan_counts[d.scan_id].second++;
  }
  for (const auto& s : options.scan_universe)
    res.per_scan_counts.emplace(s, std::make_pair(0, 0));
  res.n_scans = static_cast<std::int64_t>(res.per_scan_counts.size());

  std::set<std::string> detected;
  for (const auto& d : detections) {
    std::vector<std::pair<double, const GtNodule*>> overlapping;
    auto it = targets_by_scan.find(d.scan_id);
    if (it != targets_by_scan.end()) {
      for (const GtNodule* g : it->second) {
        double v = pair_iou(d, *g, options);
        if (v > options.threshold) overlapping.emplace_back(v, g);
      }
    }
    if (overlapping.empty()) {
      res.unmatched_detections.push_back({d.detection_id, d.scan_id, d.score});
      continue;
    }
    std::sort(overlapping.begin(), overlapping.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second->nodule_id < b.second->nodule_id;
              });
    const auto& best = overlapping.front();
    res.assignments.push_back(
        {d.detection_id, best.second->nodule_id, d.scan_id, best.first, d.score});
    detected.insert(best.second->nodule_id);
    for (std::size_t k = 1; k < overlapping.size(); ++k)
      res.alternatives.push_back(
          {d.detection_id, overlapping[k].second->nodule_id, overlapping[k].first});
  }
  for (const auto& id : res.target_ids)
    if (!detected.count(id)) res.undetected_gt.push_back(id);
  return res;
}

std::vector<LinkedPair> link_longitudinal(const std::vector<GtNodule>& gt_nodules,
                                          const std::vector<ScanRecord>& scans,
                                          const PairingResult& pairing_t1,
                                          const PairingResult& pairing_t2,
                                          std::int64_t* n_skipped) {
  std::map<std::string, const ScanRecord*> scan_by_id;
  for (const auto& s : scans) scan_by_id.emplace(s.scan_id, &s);

  std::map<std::string, double> best_score;
  for (const PairingResult* pr : {&pairing_t1, &pairing_t2})
    for (const auto& a : pr->assignments) {
      auto [it, inserted] = best_score.emplace(a.nodule_id, a.score);
      if (!inserted) it->second = std::max(it->second, a.score);
    }

  // longitudinal_id -> nodule record seen at each timepoint
  struct Sides {
    const GtNodule* t2 = nullptr;
    const GtNodule* t1 = nullptr;
    const ScanRecord* s2 = nullptr;
    const ScanRecord* s1 = nullptr;
  };
  std::map<std::string, Sides> byline;
  for (const auto& g : gt_nodules) {
    if (!g.longitudinal_id) continue;
    auto sit = scan_by_id.find(g.scan_id);
    if (sit == scan_by_id.end()) continue;
    const ScanRecord* sc = sit->second;
    Sides& s = byline[*g.longitudinal_id];
    if (sc->timepoint == -2 && !s.t2) {
      s.t2 = &g;
      s.s2 = sc;
    } else if (sc->timepoint == -1 && !s.t1) {
      s.t1 = &g;
      s.s1 = sc;
    }
  }

  std::int64_t skipped = 0;
  std::vector<LinkedPair> out;
  for (const auto& [lid, s] : byline) {
    if (!s.t2 || !s.t1) continue;
    if (!s.t2->volume_mm3 || !s.t1->volume_mm3 || !s.t2->diameter_mm || !s.t1->diameter_mm) {
      ++skipped;
      continue;
    }
    LinkedPair lp;
    lp.longitudinal_id = lid;
    lp.patient_id = s.s1->patient_id;
    lp.label = s.t1->label;
    lp.nodule_id_t2 = s.t2->nodule_id;
    lp.nodule_id_t1 = s.t1->nodule_id;
    lp.v2 = *s.t2->volume_mm3;
    lp.v1 = *s.t1->volume_mm3;
    lp.t2 = static_cast<double>(s.s2->acquisition_day);
    lp.t1 = static_cast<double>(s.s1->acquisition_day);
    lp.d2 = *s.t2->diameter_mm;
    lp.d1 = *s.t1->diameter_mm;
    auto p = best_score.find(s.t2->nodule_id);
    lp.p2 = p == best_score.end() ? 0.0 : p->second;
    p = best_score.find(s.t1->nodule_id);
    lp.p1 = p == best_score.end() ? 0.0 : p->second;
    out.push_back(std::move(lp));
  }
  if (n_skipped) *n_skipped = skipped;
  return out;
}

const LinkedPair& largest_nodule_at_first_tp(const std::vector<LinkedPair>& pairs) {
  if (pairs.empty()) throw input_error("largest_nodule_at_first_tp: empty input");
  const LinkedPair* best = &pairs.front();
  for (const auto& p : pairs) {
    if (p.v2 > best->v2 ||
        (p.v2 == best->v2 &&
         (p.v1 > best->v1 || (p.v1 == best->v1 && p.nodule_id_t2 < best->nodule_id_t2))))
      best = &p;
  }
  return *best;
}

std::vector<Finding> dedup(const std::vector<Finding>& findings, double min_diameter_mm) {
  // pass 1: per finding, keep the one sufficiently large component nearest
  // its patch center
  std::vector<Finding> cleaned;
  for (const auto& f : findings) {
    const MaskContainer* best = nullptr;
    double best_dist = 0.0;
    std::int64_t best_first = 0;
    auto comps = connected_components(f.mask, 26);
    for (const auto& c : comps) {
      if (diameter_v1(c).mean < min_diameter_mm) continue;
      auto ctr = mask_centroid_mm(c);
      double dist = 0.0;
      for (int i = 0; i < 3; ++i) {
        double dd = ctr[i] - f.patch_center_mm[i];
        dist += dd * dd;
      }
      std::int64_t first = c.runs.front().start;
      if (!best || dist < best_dist || (dist == best_dist && first < best_first)) {
        best = &c;
        best_dist = dist;
        best_first = first;
      }
    }
    if (!best) continue;
    Finding g;
    g.mask = *best;
    g.bbox = tight_bbox(g.mask);
    g.score = f.score;
    g.patch_center_mm = f.patch_center_mm;
    cleaned.push_back(std::move(g));
  }
  if (cleaned.size() > 1) {
    for (std::size_t i = 1; i < cleaned.size(); ++i)
      if (cleaned[i].mask.shape != cleaned[0].mask.shape ||
          cleaned[i].mask.spacing != cleaned[0].mask.spacing)
        throw input_error("dedup: findings must share one voxel grid");
  }

  // pass 2: merge intersecting masks into their union, max score wins
  const int n = static_cast<int>(cleaned.size());
  DsuVec dsu(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (masks_intersect(cleaned[i].mask, cleaned[j].mask)) dsu.unite(i, j);

  std::vector<Finding> out;
  std::map<int, std::size_t> group_slot;  // root -> output index
  for (int i = 0; i < n; ++i) {
    int root = dsu.find(i);
    auto it = group_slot.find(root);
    if (it == group_slot.end()) {
      group_slot.emplace(root, out.size());
      out.push_back(std::move(cleaned[i]));
    } else {
      Finding& g = out[it->second];
      g.mask = mask_union(g.mask, cleaned[i].mask);
      g.score = std::max(g.score, cleaned[i].score);
      g.bbox = tight_bbox(g.mask);
    }
  }
  return out;
}

std::vector<Finding> size_window_filter(const std::vector<Finding>& findings,
                                        double low_mm, double high_mm) {
  std::vector<Finding> out;
  for (const auto& f : findings) {
    double d = diameter_v1(f.mask).mean;
    if (d >= low_mm && d <= high_mm) out.push_back(f);
  }
  return out;
}

}  // namespace cadeval
