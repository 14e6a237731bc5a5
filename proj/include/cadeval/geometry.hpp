#pragma once
// Bounding boxes and the slice-based long-/short-axis diameter measurements.
#include <array>
#include <cstdint>

#include "cadeval/mask.hpp"

namespace cadeval {

struct BoundingBox3D {
  std::array<std::int64_t, 3> min{0, 0, 0};  // (z, y, x), inclusive
  std::array<std::int64_t, 3> max{0, 0, 0};  // (z, y, x), exclusive

  bool operator==(const BoundingBox3D&) const = default;
  bool valid() const {
    return min[0] < max[0] && min[1] < max[1] && min[2] < max[2];
  }
  std::int64_t volume() const {
    return (max[0] - min[0]) * (max[1] - min[1]) * (max[2] - min[2]);
  }
};

double iou(const BoundingBox3D& a, const BoundingBox3D& b);

// Tight box around the foreground; throws input_error on an empty mask.
BoundingBox3D tight_bbox(const MaskContainer& m);

struct DiameterResult {
  double lax = 0.0;   // mm
  double sax = 0.0;   // mm
  double mean = 0.0;  // (lax + sax) / 2
  std::int64_t slice_index = 0;
};

// Largest 3D component by volume, axial slice of largest area (ties to the
// lower index); LAX = longest chord of the slice footprint's convex hull
// (hull over voxel corner points, in-plane mm); SAX = longest segment inside
// the hull orthogonal to the LAX. Single-voxel slices degrade to the voxel
// footprint side lengths.
DiameterResult diameter_v1(const MaskContainer& m);

// Same slice selection, but measured on the largest 2D component of that
// slice; the SAX is the longest segment contained in the segmentation itself
// (endpoints on its border), extended to meet the LAX when the two do not
// intersect.
DiameterResult diameter_v2(const MaskContainer& m);

}  // namespace cadeval
