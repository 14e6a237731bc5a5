#include "cadeval/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cadeval/error.hpp"
#include "cadeval/io.hpp"
#include "cadeval/rng.hpp"

namespace cadeval {
namespace {

constexpr double kSpacing = 0.625;  // isotropic voxel size, mm
constexpr double kPi = 3.14159265358979323846;

// substream salts: one independent generator per (patient, concern)
enum Purpose : std::uint64_t { kRadius = 1, kVdt = 2, kScore = 3, kFp = 4 };

std::string pad_id(char prefix, std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%06lld", prefix, static_cast<long long>(i));
  return buf;
}

void check_spec(const SynthSpec& s) {
  auto bad = [](const std::string& what) { throw input_error("synth spec: " + what); };
  if (s.n_patients <= 0) bad("n_patients must be > 0");
  if (!(s.cancer_prevalence >= 0.0 && s.cancer_prevalence <= 1.0))
    bad("cancer_prevalence must be in [0,1]");
  for (double v : {s.mal_score_alpha, s.mal_score_beta, s.ben_score_alpha, s.ben_score_beta,
                   s.mal_vdt_median_days, s.mal_vdt_sigma, s.ben_vdt_median_days,
                   s.ben_vdt_sigma, s.radius_min_mm, s.radius_max_mm})
    if (!(v > 0.0)) bad("distribution parameters must be strictly positive");
  if (s.radius_min_mm > s.radius_max_mm) bad("radius range inverted");
  if (!(s.fp_per_scan >= 0.0)) bad("fp_per_scan must be >= 0");
}

struct Sphere {
  MaskContainer mask;
  BoundingBox3D bbox;
};

// Voxelizes a sphere of radius r_mm centered in its own cubic grid.  A voxel
// belongs to the sphere when its center lies inside.  The grid leaves a
// >= 6-voxel margin on every side, so box (1,1,1)-(4,4,4) used for synthetic
// false-positive detections never touches the nodule.
Sphere voxel_sphere(double r_mm) {
  const double rvox = r_mm / kSpacing;
  const std::int64_t dim = 2 * static_cast<std::int64_t>(std::ceil(rvox)) + 12;
  const double h = 0.5 * static_cast<double>(dim);
  Sphere out;
  out.mask.shape = {dim, dim, dim};
  out.mask.spacing = {kSpacing, kSpacing, kSpacing};
  bool any = false;
  BoundingBox3D bb{{0, 0, 0}, {0, 0, 0}};
  for (std::int64_t z = 0; z < dim; ++z) {
    const double dz = (static_cast<double>(z) + 0.5) - h;
    const double rem_z = rvox * rvox - dz * dz;
    if (rem_z < 0.0) continue;
    for (std::int64_t y = 0; y < dim; ++y) {
      const double dy = (static_cast<double>(y) + 0.5) - h;
      const double rem = rem_z - dy * dy;
      if (rem < 0.0) continue;
      const double half = std::sqrt(rem);
      const auto xlo = static_cast<std::int64_t>(std::ceil(h - half - 0.5));
      const auto xhi = static_cast<std::int64_t>(std::floor(h + half - 0.5));
      if (xlo > xhi) continue;
      out.mask.runs.push_back({(z * dim + y) * dim + xlo, xhi - xlo + 1});
      if (!any) {
        bb.min = {z, y, xlo};
        bb.max = {z + 1, y + 1, xhi + 1};
        any = true;
      } else {
        bb.min[0] = std::min(bb.min[0], z);
        bb.min[1] = std::min(bb.min[1], y);
        bb.min[2] = std::min(bb.min[2], xlo);
        bb.max[0] = std::max(bb.max[0], z + 1);
        bb.max[1] = std::max(bb.max[1], y + 1);
        bb.max[2] = std::max(bb.max[2], xhi + 1);
      }
    }
  }
  out.bbox = bb;
  return out;
}

}  // namespace

SynthCohort synth_cohort(const SynthSpec& spec) {
  check_spec(spec);
  SynthCohort out;
  const std::int64_t n_cancer =
      std::llround(static_cast<double>(spec.n_patients) * spec.cancer_prevalence);

  static const char* kStages[] = {"1A", "1B", "2B", "3A", "4"};
  static const std::pair<const char*, const char*> kScanner[] = {
      {"SIEMENS", "B30f"},
      {"GE MEDICAL SYSTEMS", "LUNG"},
      {"Siemens Healthineers", "B50f"},
      {"TOSHIBA", "FC51"},
      {"Philips", "C"},
  };
  static const double kSlice[] = {0.625, 1.0, 1.25, 2.0, 2.5};

  for (std::int64_t i = 0; i < spec.n_patients; ++i) {
    const bool cancer = i < n_cancer;
    const std::string pid = pad_id('p', i);

    PatientRecord p;
    p.patient_id = pid;
    p.cancer_status = cancer;
    if (cancer) p.stage = kStages[i % 5];
    p.age = 55.0 + static_cast<double>(i % 20);
    p.sex = (i % 2 == 0) ? Sex::male : Sex::female;
    p.dataset = (i % 3 == 0) ? "synth_b" : "synth_a";
    p.copd = (i % 5 == 0);
    out.cohort.patients.push_back(std::move(p));

    Rng rng_radius(mix_seed(spec.seed, static_cast<std::uint64_t>(i), kRadius));
    Rng rng_vdt(mix_seed(spec.seed, static_cast<std::uint64_t>(i), kVdt));
    Rng rng_score(mix_seed(spec.seed, static_cast<std::uint64_t>(i), kScore));
    Rng rng_fp(mix_seed(spec.seed, static_cast<std::uint64_t>(i), kFp));

    const double r0 = rng_radius.uniform(spec.radius_min_mm, spec.radius_max_mm);
    const double vdt_median = cancer ? spec.mal_vdt_median_days : spec.ben_vdt_median_days;
    const double vdt_sigma = cancer ? spec.mal_vdt_sigma : spec.ben_vdt_sigma;
    const double vdt_days = vdt_median * std::exp(vdt_sigma * rng_vdt.normal());
    const double v0 = 4.0 / 3.0 * kPi * r0 * r0 * r0;

    for (int k = 0; k < 2; ++k) {
      const double day = k == 0 ? 0.0 : 365.0;
      const double volume = v0 * std::exp2(day / vdt_days);
      const double radius = std::cbrt(3.0 * volume / (4.0 * kPi));

      ScanRecord sc;
      sc.scan_id = pid + (k == 0 ? "_s0" : "_s1");
      sc.patient_id = pid;
      sc.timepoint = k == 0 ? -2 : -1;
      sc.acquisition_day = k == 0 ? 0 : 365;
      sc.manufacturer = kScanner[i % 5].first;
      sc.kernel = kScanner[i % 5].second;
      sc.slice_thickness = kSlice[i % 5];
      sc.spacing = {kSpacing, kSpacing, kSpacing};

      Sphere sphere = voxel_sphere(radius);

      GtNodule g;
      g.nodule_id = sc.scan_id + "_g0";
      g.scan_id = sc.scan_id;
      g.label = cancer ? "malignant" : "benign";
      g.bbox = sphere.bbox;
      g.diameter_mm = 2.0 * radius;
      g.volume_mm3 = volume;
      g.longitudinal_id = pid + "_n0";
      if (spec.with_masks) {
        g.mask_ref = g.nodule_id;
        out.masks.emplace(g.nodule_id, std::move(sphere.mask));
      }

      Detection tp;
      tp.detection_id = sc.scan_id + "_d0";
      tp.scan_id = sc.scan_id;
      tp.score = cancer ? rng_score.beta(spec.mal_score_alpha, spec.mal_score_beta)
                        : rng_score.beta(spec.ben_score_alpha, spec.ben_score_beta);
      tp.bbox = g.bbox;
      out.cohort.detections.push_back(std::move(tp));

      const std::int64_t n_fp = rng_fp.poisson(spec.fp_per_scan);
      for (std::int64_t f = 0; f < n_fp; ++f) {
        Detection fp;
        fp.detection_id = sc.scan_id + "_f" + std::to_string(f);
        fp.scan_id = sc.scan_id;
        fp.score = rng_fp.uniform01();
        fp.bbox = {{1, 1, 1}, {4, 4, 4}};
        out.cohort.detections.push_back(std::move(fp));
      }

      out.cohort.gt_nodules.push_back(std::move(g));
      out.cohort.scans.push_back(std::move(sc));
    }
  }
  return out;
}

void write_synth_cohort(const std::string& dir, const SynthSpec& spec) {
  SynthCohort sc = synth_cohort(spec);
  std::filesystem::create_directories(dir);
  CohortPaths paths;
  paths.patients = dir + "/patients.ndrec";
  paths.scans = dir + "/scans.ndrec";
  paths.gt_nodules = dir + "/gt.ndrec";
  paths.detections = dir + "/detections.ndrec";
  write_cohort(paths, sc.cohort);
  if (spec.with_masks) {
    std::filesystem::create_directories(dir + "/masks");
    for (const auto& [ref, mask] : sc.masks)
      write_mask(dir + "/masks/" + ref + ".vmask", mask);
  }
}

}  // namespace cadeval
