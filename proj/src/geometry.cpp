#include "cadeval/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "cadeval/error.hpp"

namespace cadeval {

double iou(const BoundingBox3D& a, const BoundingBox3D& b) {
  if (!a.valid() || !b.valid()) throw input_error("iou: invalid bounding box");
  std::int64_t inter = 1;
  for (int k = 0; k < 3; ++k) {
    std::int64_t lo = std::max(a.min[k], b.min[k]);
    std::int64_t hi = std::min(a.max[k], b.max[k]);
    if (hi <= lo) return 0.0;
    inter *= hi - lo;
  }
  std::int64_t uni = a.volume() + b.volume() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox3D tight_bbox(const MaskContainer& m) {
  if (m.runs.empty()) throw input_error("tight_bbox: empty mask");
  BoundingBox3D b;
  b.min = {INT64_MAX, INT64_MAX, INT64_MAX};
  b.max = {INT64_MIN, INT64_MIN, INT64_MIN};
  for_each_voxel(m, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::int64_t) {
    b.min[0] = std::min(b.min[0], z);
    b.min[1] = std::min(b.min[1], y);
    b.min[2] = std::min(b.min[2], x);
    b.max[0] = std::max(b.max[0], z + 1);
    b.max[1] = std::max(b.max[1], y + 1);
    b.max[2] = std::max(b.max[2], x + 1);
  });
  return b;
}

namespace {

struct Pt {
  double y, x;
  bool operator<(const Pt& o) const { return y != o.y ? y < o.y : x < o.x; }
  bool operator==(const Pt& o) const { return y == o.y && x == o.x; }
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
  return (a.y - o.y) * (b.x - o.x) - (a.x - o.x) * (b.y - o.y);
}

double dist(const Pt& a, const Pt& b) {
  return std::hypot(a.y - b.y, a.x - b.x);
}

// Andrew monotone chain; returns hull vertices in order, no repeated endpoint.
std::vector<Pt> convex_hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<Pt> h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

// Voxel footprint corners in mm for a set of in-plane voxels.
std::vector<Pt> corner_points(const std::vector<std::pair<std::int64_t, std::int64_t>>& vox,
                              double sy, double sx) {
  std::vector<Pt> pts;
  pts.reserve(vox.size() * 4);
  for (auto [y, x] : vox) {
    double y0 = static_cast<double>(y) * sy, y1 = static_cast<double>(y + 1) * sy;
    double x0 = static_cast<double>(x) * sx, x1 = static_cast<double>(x + 1) * sx;
    pts.push_back({y0, x0});
    pts.push_back({y0, x1});
    pts.push_back({y1, x0});
    pts.push_back({y1, x1});
  }
  return pts;
}

struct Chord {
  Pt a, b;
  double len = 0.0;
};

// Longest chord over hull vertex pairs; ties resolved by smaller angle to the
// y-axis, then by lexicographic endpoint order.
Chord longest_chord(const std::vector<Pt>& hull) {
  Chord best;
  double best_angle = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    for (std::size_t j = i + 1; j < hull.size(); ++j) {
      Pt a = hull[i], b = hull[j];
      if (b < a) std::swap(a, b);
      double len = dist(a, b);
      double angle = std::atan2(std::fabs(b.x - a.x), std::fabs(b.y - a.y));
      bool better = false;
      if (len > best.len + 1e-12) {
        better = true;
      } else if (len > best.len - 1e-12) {
        if (angle < best_angle - 1e-12)
          better = true;
        else if (angle < best_angle + 1e-12 &&
                 (a < best.a || (a == best.a && b < best.b)))
          better = true;
      }
      if (better) {
        best = {a, b, len};
        best_angle = angle;
      }
    }
  }
  return best;
}

// Width of the hull along v at offset t along u (u, v orthonormal).
double hull_width_at(const std::vector<Pt>& hull, Pt u, Pt v, double t) {
  constexpr double eps = 1e-9;
  double smin = std::numeric_limits<double>::infinity();
  double smax = -std::numeric_limits<double>::infinity();
  auto add = [&](double s) {
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  };
  std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Pt& p1 = hull[i];
    const Pt& p2 = hull[(i + 1) % n];
    double t1 = p1.y * u.y + p1.x * u.x, s1 = p1.y * v.y + p1.x * v.x;
    double t2 = p2.y * u.y + p2.x * u.x, s2 = p2.y * v.y + p2.x * v.x;
    if (std::fabs(t1 - t) < eps) add(s1);
    if (std::fabs(t2 - t) < eps) add(s2);
    if ((t1 < t) != (t2 < t) && std::fabs(t2 - t1) > eps) {
      double lam = (t - t1) / (t2 - t1);
      add(s1 + lam * (s2 - s1));
    }
  }
  return smax >= smin ? smax - smin : 0.0;
}

// In-plane voxels of a mask component restricted to slice z.
std::vector<std::pair<std::int64_t, std::int64_t>> slice_voxels(const MaskContainer& comp,
                                                                std::int64_t z) {
  std::vector<std::pair<std::int64_t, std::int64_t>> vox;
  for_each_voxel(comp, [&](std::int64_t vz, std::int64_t vy, std::int64_t vx, std::int64_t) {
    if (vz == z) vox.push_back({vy, vx});
  });
  return vox;
}

struct SliceChoice {
  MaskContainer component;  // largest 3D component
  std::int64_t z = 0;       // slice of largest area
  std::vector<std::pair<std::int64_t, std::int64_t>> vox;
};

SliceChoice choose_slice(const MaskContainer& m) {
  if (voxel_count(m) == 0) throw input_error("diameter: empty mask");
  auto comps = connected_components(m, 26);
  SliceChoice c;
  c.component = comps.front();
  std::map<std::int64_t, std::int64_t> area;  // z -> voxel count
  for_each_voxel(c.component,
                 [&](std::int64_t z, std::int64_t, std::int64_t, std::int64_t) { ++area[z]; });
  std::int64_t best_z = -1, best_area = -1;
  for (auto [z, a] : area) {
    if (a > best_area) {  // map iteration is ascending, so ties keep lower z
      best_area = a;
      best_z = z;
    }
  }
  c.z = best_z;
  c.vox = slice_voxels(c.component, best_z);
  return c;
}

DiameterResult finish(double lax, double sax, std::int64_t z) {
  DiameterResult r;
  r.lax = lax;
  r.sax = sax;
  r.mean = 0.5 * (lax + sax);
  r.slice_index = z;
  return r;
}

DiameterResult single_voxel_result(double sy, double sx, std::int64_t z) {
  return finish(std::max(sy, sx), std::min(sy, sx), z);
}

// Largest 8-connected 2D component of the slice footprint; ties by smaller
// minimal (y, x) index.
std::vector<std::pair<std::int64_t, std::int64_t>> largest_2d_component(
    std::vector<std::pair<std::int64_t, std::int64_t>> vox) {
  std::sort(vox.begin(), vox.end());
  std::set<std::pair<std::int64_t, std::int64_t>> todo(vox.begin(), vox.end());
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> comps;
  while (!todo.empty()) {
    std::vector<std::pair<std::int64_t, std::int64_t>> comp, stack{*todo.begin()};
    todo.erase(todo.begin());
    while (!stack.empty()) {
      auto [y, x] = stack.back();
      stack.pop_back();
      comp.push_back({y, x});
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          if (!dy && !dx) continue;
          auto it = todo.find({y + dy, x + dx});
          if (it != todo.end()) {
            stack.push_back(*it);
            todo.erase(it);
          }
        }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return comps.front();
}

}  // namespace

DiameterResult diameter_v1(const MaskContainer& m) {
  SliceChoice c = choose_slice(m);
  double sy = m.spacing[1], sx = m.spacing[2];
  if (c.vox.size() == 1) return single_voxel_result(sy, sx, c.z);

  auto hull = convex_hull(corner_points(c.vox, sy, sx));
  Chord lax = longest_chord(hull);
  Pt u{(lax.b.y - lax.a.y) / lax.len, (lax.b.x - lax.a.x) / lax.len};
  Pt v{-u.x, u.y};
  double sax = 0.0;
  for (const Pt& p : hull)
    sax = std::max(sax, hull_width_at(hull, u, v, p.y * u.y + p.x * u.x));
  return finish(lax.len, std::min(sax, lax.len), c.z);
}

DiameterResult diameter_v2(const MaskContainer& m) {
  SliceChoice c = choose_slice(m);
  double sy = m.spacing[1], sx = m.spacing[2];
  auto vox = largest_2d_component(c.vox);
  if (vox.size() == 1) return single_voxel_result(sy, sx, c.z);

  auto hull = convex_hull(corner_points(vox, sy, sx));
  Chord lax = longest_chord(hull);
  Pt u{(lax.b.y - lax.a.y) / lax.len, (lax.b.x - lax.a.x) / lax.len};
  Pt v{-u.x, u.y};

  constexpr double eps = 1e-9;
  // Candidate line offsets along u: corner projections and midpoints.
  std::vector<double> ts;
  for (auto [y, x] : vox)
    for (int cy = 0; cy <= 1; ++cy)
      for (int cx = 0; cx <= 1; ++cx)
        ts.push_back(static_cast<double>(y + cy) * sy * u.y +
                     static_cast<double>(x + cx) * sx * u.x);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double a, double b) { return std::fabs(a - b) < eps; }),
           ts.end());
  std::vector<double> cands = ts;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) cands.push_back(0.5 * (ts[i] + ts[i + 1]));

  double tA = lax.a.y * u.y + lax.a.x * u.x;
  double tB = lax.b.y * u.y + lax.b.x * u.x;
  double sA = lax.a.y * v.y + lax.a.x * v.x;
  double sB = lax.b.y * v.y + lax.b.x * v.x;

  double best_len = -1.0, best_lo = 0.0, best_hi = 0.0, best_t = 0.0;
  std::vector<std::pair<double, double>> ivals;
  for (double t : cands) {
    ivals.clear();
    for (auto [y, x] : vox) {
      // s-range where the line t*u + s*v stays inside this voxel square.
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      bool ok = true;
      double bounds[2][2] = {{static_cast<double>(y) * sy, static_cast<double>(y + 1) * sy},
                             {static_cast<double>(x) * sx, static_cast<double>(x + 1) * sx}};
      double uu[2] = {u.y, u.x}, vv[2] = {v.y, v.x};
      for (int axis = 0; axis < 2 && ok; ++axis) {
        double base = t * uu[axis];
        if (std::fabs(vv[axis]) < eps) {
          if (base < bounds[axis][0] - eps || base > bounds[axis][1] + eps) ok = false;
        } else {
          double s0 = (bounds[axis][0] - base) / vv[axis];
          double s1 = (bounds[axis][1] - base) / vv[axis];
          if (s0 > s1) std::swap(s0, s1);
          lo = std::max(lo, s0);
          hi = std::min(hi, s1);
        }
      }
      if (ok && hi >= lo - eps) ivals.push_back({lo, std::max(lo, hi)});
    }
    if (ivals.empty()) continue;
    std::sort(ivals.begin(), ivals.end());
    double cur_lo = ivals[0].first, cur_hi = ivals[0].second;
    double len = 0.0, lo_best = cur_lo, hi_best = cur_hi;
    auto flush = [&]() {
      if (cur_hi - cur_lo > len) {
        len = cur_hi - cur_lo;
        lo_best = cur_lo;
        hi_best = cur_hi;
      }
    };
    for (std::size_t i = 1; i < ivals.size(); ++i) {
      if (ivals[i].first <= cur_hi + eps) {
        cur_hi = std::max(cur_hi, ivals[i].second);
      } else {
        flush();
        cur_lo = ivals[i].first;
        cur_hi = ivals[i].second;
      }
    }
    flush();
    if (len > best_len + 1e-12) {
      best_len = len;
      best_lo = lo_best;
      best_hi = hi_best;
      best_t = t;
    }
  }

  // Extend the segment to reach the LAX if the two do not intersect. The LAX
  // bridges the extreme projections, so best_t always lies between tA and tB.
  double s_on_lax = sA + (sB - sA) * (best_t - tA) / (tB - tA);
  double lo = std::min(best_lo, s_on_lax), hi = std::max(best_hi, s_on_lax);
  return finish(lax.len, std::min(hi - lo, lax.len), c.z);
}

}  // namespace cadeval
