#include "cadeval/mask.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include "cadeval/error.hpp"

namespace cadeval {

void canonicalize(MaskContainer& m) {
  const std::int64_t n = m.grid_size();
  for (const auto& r : m.runs) {
    if (r.length <= 0 || r.start < 0 || r.start + r.length > n)
      throw input_error("mask run outside grid");
  }
  std::sort(m.runs.begin(), m.runs.end(),
            [](const MaskRun& a, const MaskRun& b) { return a.start < b.start; });
  std::vector<MaskRun> out;
  for (const auto& r : m.runs) {
    if (!out.empty() && r.start <= out.back().start + out.back().length) {
      std::int64_t end = std::max(out.back().start + out.back().length, r.start + r.length);
      out.back().length = end - out.back().start;
    } else {
      out.push_back(r);
    }
  }
  m.runs = std::move(out);
}

std::int64_t voxel_count(const MaskContainer& m) {
  std::int64_t c = 0;
  for (const auto& r : m.runs) c += r.length;
  return c;
}

double mask_volume(const MaskContainer& m) {
  return static_cast<double>(voxel_count(m)) * m.spacing[0] * m.spacing[1] * m.spacing[2];
}

MaskContainer mask_from_indices(std::array<std::int64_t, 3> shape,
                                std::array<double, 3> spacing,
                                std::vector<std::int64_t> indices) {
  MaskContainer m;
  m.shape = shape;
  m.spacing = spacing;
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  for (std::size_t i = 0; i < indices.size();) {
    std::size_t j = i + 1;
    while (j < indices.size() && indices[j] == indices[j - 1] + 1) ++j;
    m.runs.push_back({indices[i], static_cast<std::int64_t>(j - i)});
    i = j;
  }
  canonicalize(m);
  return m;
}

namespace {

// A run restricted to a single (z, y) row: x in [x0, x1).
struct Segment {
  std::int64_t z, y, x0, x1;
  std::int64_t flat_start;
};

std::vector<Segment> row_segments(const MaskContainer& m) {
  const std::int64_t ny = m.shape[1], nx = m.shape[2];
  std::vector<Segment> segs;
  for (const auto& r : m.runs) {
    std::int64_t f = r.start, remaining = r.length;
    while (remaining > 0) {
      std::int64_t z = f / (ny * nx), rem = f % (ny * nx);
      std::int64_t y = rem / nx, x = rem % nx;
      std::int64_t take = std::min(remaining, nx - x);
      segs.push_back({z, y, x, x + take, f});
      f += take;
      remaining -= take;
    }
  }
  return segs;
}

struct UnionFind {
  std::vector<std::int32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::int32_t find(std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[b] = a;
  }
};

}  // namespace

std::vector<MaskContainer> connected_components(const MaskContainer& m, int connectivity) {
  if (connectivity != 6 && connectivity != 26)
    throw input_error("connectivity must be 6 or 26");
  MaskContainer canon = m;
  canonicalize(canon);
  auto segs = row_segments(canon);
  if (segs.empty()) return {};

  // Index segments by row for neighbor lookups.
  const std::int64_t ny = m.shape[1];
  std::vector<std::pair<std::int64_t, std::int32_t>> by_row;  // (row key, segment idx)
  by_row.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i)
    by_row.push_back({segs[i].z * ny + segs[i].y, static_cast<std::int32_t>(i)});
  std::sort(by_row.begin(), by_row.end());

  UnionFind uf(segs.size());
  // Canonical runs cannot touch within a row, so only cross-row adjacency
  // matters. Diagonal-inclusive connectivity lets x-intervals touch at
  // endpoints; face connectivity needs a shared x column.
  const std::int64_t slack = connectivity == 26 ? 1 : 0;
  auto visit_row = [&](std::int64_t z, std::int64_t y, const Segment& s, std::int32_t si) {
    if (z < 0 || z >= canon.shape[0] || y < 0 || y >= ny) return;
    std::int64_t key = z * ny + y;
    auto it = std::lower_bound(by_row.begin(), by_row.end(),
                               std::make_pair(key, std::int32_t{-1}));
    for (; it != by_row.end() && it->first == key; ++it) {
      const Segment& t = segs[it->second];
      if (s.x0 < t.x1 + slack && t.x0 < s.x1 + slack) uf.unite(si, it->second);
    }
  };
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Segment& s = segs[i];
    auto si = static_cast<std::int32_t>(i);
    if (connectivity == 6) {
      visit_row(s.z, s.y - 1, s, si);
      visit_row(s.z, s.y + 1, s, si);
      visit_row(s.z - 1, s.y, s, si);
      visit_row(s.z + 1, s.y, s, si);
    } else {
      for (std::int64_t dz = -1; dz <= 1; ++dz)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
          if (dz || dy) visit_row(s.z + dz, s.y + dy, s, si);
    }
  }

  struct Acc {
    std::vector<std::int32_t> seg_idx;
    std::int64_t count = 0;
    std::int64_t min_flat = INT64_MAX;
  };
  std::vector<std::int32_t> roots(segs.size());
  std::vector<Acc> accs;
  std::vector<std::int32_t> root_to_acc(segs.size(), -1);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    std::int32_t r = uf.find(static_cast<std::int32_t>(i));
    if (root_to_acc[r] < 0) {
      root_to_acc[r] = static_cast<std::int32_t>(accs.size());
      accs.emplace_back();
    }
    Acc& a = accs[root_to_acc[r]];
    a.seg_idx.push_back(static_cast<std::int32_t>(i));
    a.count += segs[i].x1 - segs[i].x0;
    a.min_flat = std::min(a.min_flat, segs[i].flat_start);
  }
  std::sort(accs.begin(), accs.end(), [](const Acc& a, const Acc& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.min_flat < b.min_flat;
  });

  std::vector<MaskContainer> out;
  out.reserve(accs.size());
  for (const auto& a : accs) {
    MaskContainer c;
    c.shape = m.shape;
    c.spacing = m.spacing;
    c.runs.reserve(a.seg_idx.size());
    for (auto si : a.seg_idx)
      c.runs.push_back({segs[si].flat_start, segs[si].x1 - segs[si].x0});
    canonicalize(c);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

// Walks two canonical run lists, reporting overlap length.
std::int64_t intersection_count(const MaskContainer& a, const MaskContainer& b) {
  std::int64_t total = 0;
  std::size_t i = 0, j = 0;
  while (i < a.runs.size() && j < b.runs.size()) {
    std::int64_t a0 = a.runs[i].start, a1 = a0 + a.runs[i].length;
    std::int64_t b0 = b.runs[j].start, b1 = b0 + b.runs[j].length;
    total += std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
    if (a1 < b1)
      ++i;
    else
      ++j;
  }
  return total;
}

}  // namespace

bool masks_intersect(const MaskContainer& a, const MaskContainer& b) {
  if (a.shape != b.shape) throw input_error("masks_intersect: shape mismatch");
  return intersection_count(a, b) > 0;
}

MaskContainer mask_union(const MaskContainer& a, const MaskContainer& b) {
  if (a.shape != b.shape) throw input_error("mask_union: shape mismatch");
  MaskContainer u;
  u.shape = a.shape;
  u.spacing = a.spacing;
  u.runs = a.runs;
  u.runs.insert(u.runs.end(), b.runs.begin(), b.runs.end());
  canonicalize(u);
  return u;
}

double mask_iou(const MaskContainer& a, const MaskContainer& b) {
  if (a.shape != b.shape) throw input_error("mask_iou: shape mismatch");
  std::int64_t inter = intersection_count(a, b);
  std::int64_t uni = voxel_count(a) + voxel_count(b) - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::array<double, 3> mask_centroid_mm(const MaskContainer& m) {
  if (m.runs.empty()) throw input_error("mask_centroid_mm: empty mask");
  double sz = 0, sy = 0, sx = 0;
  std::int64_t n = 0;
  for_each_voxel(m, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::int64_t) {
    sz += static_cast<double>(z);
    sy += static_cast<double>(y);
    sx += static_cast<double>(x);
    ++n;
  });
  double dn = static_cast<double>(n);
  return {(sz / dn + 0.5) * m.spacing[0], (sy / dn + 0.5) * m.spacing[1],
          (sx / dn + 0.5) * m.spacing[2]};
}

}  // namespace cadeval
