#pragma once
// Run-length-encoded 3D binary masks over a C-order (z-major) voxel grid.
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace cadeval {

struct MaskRun {
  std::int64_t start = 0;   // flat index, C-order (z, y, x)
  std::int64_t length = 0;  // > 0
  bool operator==(const MaskRun&) const = default;
};

struct MaskContainer {
  std::array<std::int64_t, 3> shape{0, 0, 0};  // Z, Y, X voxel counts
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // z, y, x in mm
  std::vector<MaskRun> runs;  // sorted by start, non-overlapping, non-touching

  bool operator==(const MaskContainer&) const = default;
  std::int64_t grid_size() const { return shape[0] * shape[1] * shape[2]; }
};

// Sorts runs and merges touching/overlapping ones into canonical form.
// Throws input_error if a run falls outside the grid.
void canonicalize(MaskContainer& m);

std::int64_t voxel_count(const MaskContainer& m);
double mask_volume(const MaskContainer& m);  // count * spacing product, mm^3

// Builds a canonical mask from (possibly unsorted, duplicated) flat indices.
MaskContainer mask_from_indices(std::array<std::int64_t, 3> shape,
                                std::array<double, 3> spacing,
                                std::vector<std::int64_t> indices);

// Visits every foreground voxel in flat-index order.
template <class Fn>
void for_each_voxel(const MaskContainer& m, Fn&& fn) {
  const std::int64_t ny = m.shape[1], nx = m.shape[2];
  for (const auto& r : m.runs) {
    for (std::int64_t f = r.start; f < r.start + r.length; ++f) {
      std::int64_t z = f / (ny * nx);
      std::int64_t rem = f % (ny * nx);
      fn(z, rem / nx, rem % nx, f);
    }
  }
}

// Maximal connected foreground sets, ordered by (voxel count desc,
// min flat index asc). connectivity is 6 or 26.
std::vector<MaskContainer> connected_components(const MaskContainer& m,
                                                int connectivity = 26);

bool masks_intersect(const MaskContainer& a, const MaskContainer& b);
MaskContainer mask_union(const MaskContainer& a, const MaskContainer& b);
double mask_iou(const MaskContainer& a, const MaskContainer& b);

// Centroid of foreground voxel centers in mm (z, y, x). Mask must be non-empty.
std::array<double, 3> mask_centroid_mm(const MaskContainer& m);

}  // namespace cadeval
