#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cadeval/error.hpp"
#include "cadeval/geometry.hpp"
#include "cadeval/mask.hpp"
#include "cadeval/rng.hpp"
#include "oracles.hpp"

using namespace cadeval;

namespace {

MaskContainer mask_of(std::array<std::int64_t, 3> shape, std::array<double, 3> spacing,
                      const std::vector<std::array<std::int64_t, 3>>& voxels) {
  std::vector<std::int64_t> idx;
  for (const auto& v : voxels)
    idx.push_back((v[0] * shape[1] + v[1]) * shape[2] + v[2]);
  return mask_from_indices(shape, spacing, std::move(idx));
}

// digital ball: voxel centers within r (voxel units) of the center voxel
MaskContainer digital_sphere(std::int64_t r, double spacing_mm) {
  std::int64_t n = 2 * r + 3;
  std::int64_t c = r + 1;
  std::vector<std::array<std::int64_t, 3>> vox;
  for (std::int64_t z = 0; z < n; ++z)
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x) {
        double dz = static_cast<double>(z - c), dy = static_cast<double>(y - c),
               dx = static_cast<double>(x - c);
        if (dz * dz + dy * dy + dx * dx <= static_cast<double>(r * r))
          vox.push_back({z, y, x});
      }
  return mask_of({n, n, n}, {spacing_mm, spacing_mm, spacing_mm}, vox);
}

// single-slice digital disk of radius r voxels
MaskContainer digital_disk(std::int64_t r, double spacing_mm = 1.0) {
  std::int64_t n = 2 * r + 3;
  std::int64_t c = r + 1;
  std::vector<std::array<std::int64_t, 3>> vox;
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      double dy = static_cast<double>(y - c), dx = static_cast<double>(x - c);
      if (dy * dy + dx * dx <= static_cast<double>(r * r)) vox.push_back({0, y, x});
    }
  return mask_of({1, n, n}, {1.0, spacing_mm, spacing_mm}, vox);
}

// oracle route: footprint corners -> hull -> longest chord and its
// perpendicular width
std::pair<double, double> oracle_slice_diameters(const MaskContainer& m,
                                                 std::int64_t slice) {
  std::vector<oracle::Pt> pts;
  double sy = m.spacing[1], sx = m.spacing[2];
  for_each_voxel(m, [&](std::int64_t z, std::int64_t y, std::int64_t x, std::int64_t) {
    if (z != slice) return;
    for (int cy = 0; cy <= 1; ++cy)
      for (int cx = 0; cx <= 1; ++cx)
        pts.push_back({static_cast<double>(x + cx) * sx, static_cast<double>(y + cy) * sy});
  });
  auto hull = oracle::convex_hull(pts);
  oracle::Pt a, b;
  double lax = oracle::longest_chord(hull, &a, &b);
  double ux = (b.x - a.x) / lax, uy = (b.y - a.y) / lax;
  double sax = oracle::longest_perpendicular_chord(hull, ux, uy);
  return {lax, std::min(sax, lax)};
}

}  // namespace

TEST_CASE("box iou basics") {
  BoundingBox3D a{{0, 0, 0}, {2, 2, 2}};
  CHECK(iou(a, a) == 1.0);
  BoundingBox3D b{{5, 5, 5}, {7, 7, 7}};
  CHECK(iou(a, b) == 0.0);
  BoundingBox3D c{{0, 0, 0}, {1, 1, 1}};
  BoundingBox3D d{{0, 0, 0}, {1, 1, 2}};
  CHECK(iou(c, d) == 0.5);  // inter 1, union 2
  // equal boxes shifted by half their extent: inter 1, union 3
  CHECK(iou(BoundingBox3D{{0, 0, 0}, {2, 1, 1}}, BoundingBox3D{{1, 0, 0}, {3, 1, 1}}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("iou matches the direct formula on random boxes") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    auto draw = [&]() {
      BoundingBox3D b;
      oracle::Box o;
      for (int k = 0; k < 3; ++k) {
        std::int64_t lo = static_cast<std::int64_t>(rng.uniform_index(20));
        std::int64_t len = 1 + static_cast<std::int64_t>(rng.uniform_index(10));
        b.min[k] = lo;
        b.max[k] = lo + len;
        o.min[k] = lo;
        o.max[k] = lo + len;
      }
      return std::pair(b, o);
    };
    auto [a, oa] = draw();
    auto [b, ob] = draw();
    CHECK(iou(a, b) == oracle::box_iou(oa, ob));
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("invalid boxes are rejected") {
  BoundingBox3D bad{{0, 0, 0}, {0, 1, 1}};
  CHECK_FALSE(bad.valid());
  BoundingBox3D ok{{0, 0, 0}, {1, 1, 1}};
  CHECK_THROWS_AS(iou(bad, ok), input_error);
}

TEST_CASE("tight_bbox hugs the voxels") {
  MaskContainer m = mask_of({5, 6, 7}, {1, 1, 1}, {{1, 2, 3}, {3, 4, 2}});
  BoundingBox3D b = tight_bbox(m);
  CHECK(b.min == std::array<std::int64_t, 3>{1, 2, 2});
  CHECK(b.max == std::array<std::int64_t, 3>{4, 5, 4});
  MaskContainer empty;
  empty.shape = {2, 2, 2};
  CHECK_THROWS_AS(tight_bbox(empty), input_error);
}

TEST_CASE("single voxel measures its footprint") {
  MaskContainer m = mask_of({3, 3, 3}, {1, 1, 1}, {{1, 1, 1}});
  DiameterResult r = diameter_v1(m);
  CHECK(r.lax == 1.0);
  CHECK(r.sax == 1.0);
  CHECK(r.mean == 1.0);
  CHECK(r.slice_index == 1);
  m.spacing = {1.0, 0.625, 0.625};
  DiameterResult r2 = diameter_v1(m);
  CHECK(r2.lax == 0.625);
  CHECK(r2.sax == 0.625);
  DiameterResult r3 = diameter_v2(m);
  CHECK(r3.lax == 0.625);
  CHECK(r3.sax == 0.625);
}

TEST_CASE("anisotropic single voxel reports footprint sides") {
  MaskContainer m = mask_of({1, 1, 1}, {5.0, 0.7, 0.5}, {{0, 0, 0}});
  DiameterResult r = diameter_v1(m);
  CHECK(r.lax == doctest::Approx(0.7));
  CHECK(r.sax == doctest::Approx(0.5));
}

TEST_CASE("rectangle slice matches the chord oracle") {
  // 10 x 20 voxel footprint at 1 mm: long axis is the diagonal
  std::vector<std::array<std::int64_t, 3>> vox;
  for (std::int64_t y = 0; y < 10; ++y)
    for (std::int64_t x = 0; x < 20; ++x) vox.push_back({0, y, x});
  MaskContainer m = mask_of({1, 10, 20}, {1, 1, 1}, vox);
  DiameterResult r = diameter_v1(m);
  auto [lax, sax] = oracle_slice_diameters(m, 0);
  CHECK(r.lax == doctest::Approx(lax).epsilon(1e-9));
  CHECK(r.sax == doctest::Approx(sax).epsilon(1e-9));
  CHECK(r.lax == doctest::Approx(std::sqrt(500.0)).epsilon(1e-12));
  CHECK(r.sax == doctest::Approx(std::sqrt(500.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("largest-area slice is the one measured") {
  // slice 0 has 4 voxels, slice 1 has 9: slice 1 must be chosen
  std::vector<std::array<std::int64_t, 3>> vox;
  for (std::int64_t y = 0; y < 2; ++y)
    for (std::int64_t x = 0; x < 2; ++x) vox.push_back({0, y, x});
  for (std::int64_t y = 0; y < 3; ++y)
    for (std::int64_t x = 0; x < 3; ++x) vox.push_back({1, y, x});
  MaskContainer m = mask_of({2, 3, 3}, {1, 1, 1}, vox);
  CHECK(diameter_v1(m).slice_index == 1);
}

TEST_CASE("only the largest 3d component is measured") {
  // a big plate plus a far-away single voxel
  std::vector<std::array<std::int64_t, 3>> vox;
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 4; ++x) vox.push_back({0, y, x});
  vox.push_back({5, 8, 8});
  MaskContainer m = mask_of({6, 9, 9}, {1, 1, 1}, vox);
  DiameterResult r = diameter_v1(m);
  CHECK(r.slice_index == 0);
  CHECK(r.lax == doctest::Approx(std::sqrt(32.0)));
}

TEST_CASE("digital sphere diameter lands within one voxel") {
  // a radius-r sphere of voxel centers spans 2r+1 voxels wall to wall
  for (std::int64_t r : {4, 6, 8}) {
    MaskContainer m = digital_sphere(r, 0.625);
    double want = static_cast<double>(2 * r + 1) * 0.625;
    DiameterResult d1 = diameter_v1(m);
    CHECK(std::fabs(d1.mean - want) <= 0.625);
    DiameterResult d2 = diameter_v2(m);
    CHECK(std::fabs(d2.mean - want) <= 0.625);
    CHECK(d2.lax <= d1.lax + 1e-12);
  }
}

TEST_CASE("disk footprint gives both methods the same answer") {
  for (std::int64_t r : {4, 5, 6, 7}) {
    MaskContainer m = digital_disk(r);
    DiameterResult a = diameter_v1(m);
    DiameterResult b = diameter_v2(m);
    CAPTURE(r);
    CHECK(a.lax == doctest::Approx(b.lax).epsilon(1e-9));
    CHECK(a.sax == doctest::Approx(b.sax).epsilon(1e-9));
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-9));
  }
}

TEST_CASE("crescent cannot widen under the in-segmentation rule") {
  // disk with a bite taken out of one side
  std::int64_t r = 7, n = 2 * r + 3, c = r + 1;
  std::vector<std::array<std::int64_t, 3>> vox;
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      double dy = static_cast<double>(y - c), dx = static_cast<double>(x - c);
      bool in_disk = dy * dy + dx * dx <= static_cast<double>(r * r);
      double by = dy, bx = dx - 5.0;  // bite centered right of center
      bool in_bite = by * by + bx * bx <= 16.0;
      if (in_disk && !in_bite) vox.push_back({0, y, x});
    }
  MaskContainer m = mask_of({1, n, n}, {1, 1, 1}, vox);
  DiameterResult v1 = diameter_v1(m);
  DiameterResult v2 = diameter_v2(m);
  CHECK(v2.sax <= v1.sax + 1e-12);
  CHECK(v2.lax == doctest::Approx(v1.lax).epsilon(1e-12));
  CHECK(v2.sax > 0.0);
}

TEST_CASE("random blobs: long axis equals the pairwise corner maximum") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::array<std::int64_t, 3>> vox;
    std::int64_t cy = 4 + static_cast<std::int64_t>(rng.uniform_index(4));
    std::int64_t cx = 4 + static_cast<std::int64_t>(rng.uniform_index(4));
    for (std::int64_t y = 0; y < 12; ++y)
      for (std::int64_t x = 0; x < 12; ++x) {
        double dy = static_cast<double>(y - cy), dx = static_cast<double>(x - cx);
        double rr = 2.0 + 3.0 * rng.uniform01();
        if (dy * dy + dx * dx <= rr * rr) vox.push_back({0, y, x});
      }
    if (vox.size() < 2) continue;
    double sy = 0.5 + rng.uniform01(), sx = 0.5 + rng.uniform01();
    MaskContainer m = mask_of({1, 12, 12}, {1.0, sy, sx}, vox);
    // keep the footprint connected so v1 measures all of it
    auto comps = connected_components(m, 26);
    m = comps.front();
    m.spacing = {1.0, sy, sx};
    if (voxel_count(m) < 2) continue;
    DiameterResult d = diameter_v1(m);
    double best = 0.0;
    std::vector<oracle::Pt> pts;
    for_each_voxel(m, [&](std::int64_t, std::int64_t y, std::int64_t x, std::int64_t) {
      for (int a = 0; a <= 1; ++a)
        for (int b = 0; b <= 1; ++b)
          pts.push_back({static_cast<double>(x + b) * sx, static_cast<double>(y + a) * sy});
    });
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j)
        best = std::max(best, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    CHECK(d.lax == doctest::Approx(best).epsilon(1e-9));
    CHECK(d.sax <= d.lax + 1e-12);
    CHECK(d.sax > 0.0);
  }
}

TEST_CASE("empty mask cannot be measured") {
  MaskContainer empty;
  empty.shape = {2, 2, 2};
  CHECK_THROWS_AS(diameter_v1(empty), input_error);
  CHECK_THROWS_AS(diameter_v2(empty), input_error);
}
