#include "cadeval/growth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cadeval/error.hpp"

namespace cadeval {

double vdt(double v2, double v1, double t2, double t1) {
  if (!(v2 > 0.0) || !(v1 > 0.0)) throw input_error("vdt: volumes must be positive");
  if (!(t1 > t2)) throw input_error("vdt: t1 must be after t2");
  if (v1 == v2) return std::numeric_limits<double>::infinity();
  return (t1 - t2) * std::log(2.0) / std::log(v1 / v2);
}

double rdt(double vdt_days) {
  if (std::isinf(vdt_days)) return 0.0;
  if (vdt_days == 0.0 || std::isnan(vdt_days))
    throw input_error("rdt: doubling time must be nonzero and defined");
  return 365.0 / vdt_days;
}

double volume_growth(double v2, double v1, GrowthDenominator den) {
  const double d = den == GrowthDenominator::v1_final ? v1 : v2;
  if (!(d > 0.0)) throw input_error("volume_growth: denominator volume must be positive");
  return 100.0 * (v1 - v2) / d;
}

DeltaMeasures delta_measures(const LinkedPair& linked, TimeNormalization norm) {
  DeltaMeasures m;
  m.delta_diameter = linked.d1 - linked.d2;
  if (norm == TimeNormalization::per_year) {
    m.delta_volume = linked.v1 - linked.v2;
  } else {
    const double elapsed = linked.t1 - linked.t2;
    if (!(elapsed > 0.0)) throw input_error("delta_measures: elapsed time must be positive");
    m.delta_volume = 365.0 * (linked.v1 - linked.v2) / elapsed;
  }
  return m;
}

std::vector<double> vdt_median_centered(const std::vector<double>& vdts) {
  if (vdts.empty()) throw input_error("vdt_median_centered: empty input");
  for (double v : vdts)
    if (!std::isfinite(v))
      throw input_error("vdt_median_centered: values must be finite");
  std::vector<double> sorted = vdts;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<double> out(vdts.size());
  for (std::size_t i = 0; i < vdts.size(); ++i)
    out[i] = (vdts[i] - median) * (vdts[i] - median);
  return out;
}

std::vector<double> darcy_growth(const std::vector<double>& p2,
                                 const std::vector<double>& p1, double epsilon) {
  if (p1.size() != p2.size()) throw input_error("darcy_growth: length mismatch");
  if (p1.size() < 2) throw input_error("darcy_growth: need at least 2 nodules");
  std::vector<double> delta(p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) delta[i] = p1[i] - p2[i];
  const auto [lo_it, hi_it] = std::minmax_element(delta.begin(), delta.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    const double nd = hi == lo ? 1.0 : epsilon + (delta[i] - lo) * (1.0 - epsilon) / (hi - lo);
    out[i] = p1[i] / nd;
  }
  return out;
}

const char* to_string(Nodcat n) {
  switch (n) {
    case Nodcat::small_nodule: return "small";
    case Nodcat::indeterminate: return "indeterminate_III";
    default: return "large";
  }
}

const char* to_string(Growcat g) {
  switch (g) {
    case Growcat::A: return "A";
    case Growcat::B: return "B";
    default: return "C";
  }
}

std::pair<Nodcat, Growcat> nelson_categorize(double v2_mm3, double vdt_days) {
  if (!(v2_mm3 > 0.0)) throw input_error("nelson_categorize: volume must be positive");
  Nodcat nc = v2_mm3 < 50.0    ? Nodcat::small_nodule
              : v2_mm3 <= 500.0 ? Nodcat::indeterminate
                                : Nodcat::large_nodule;
  Growcat gc;
  if (!std::isfinite(vdt_days) || vdt_days <= 0.0 || vdt_days >= 600.0)
    gc = Growcat::A;  // stable, shrinking, or slow
  else if (vdt_days >= 400.0)
    gc = Growcat::B;
  else
    gc = Growcat::C;
  return {nc, gc};
}

bool lungrads_growth_flag(double delta_diameter_mm) { return delta_diameter_mm >= 1.5; }

std::vector<GrowthRecord> build_growth_records(const std::vector<LinkedPair>& pairs,
                                               TimeNormalization norm,
                                               GrowthDenominator den) {
  std::vector<GrowthRecord> out;
  out.reserve(pairs.size());
  for (const auto& lp : pairs) {
    GrowthRecord r;
    r.linked = lp;
    r.vdt_days = vdt(lp.v2, lp.v1, lp.t2, lp.t1);
    r.rdt_per_year = rdt(r.vdt_days);
    r.volume_growth_pct = volume_growth(lp.v2, lp.v1, den);
    const DeltaMeasures dm = delta_measures(lp, norm);
    r.delta_volume = dm.delta_volume;
    r.delta_diameter = dm.delta_diameter;
    auto [nc, gc] = nelson_categorize(lp.v2, r.vdt_days);
    r.nodcat = nc;
    r.growcat = gc;
    r.lungrads_flag = lungrads_growth_flag(r.delta_diameter);
    out.push_back(std::move(r));
  }

  std::vector<double> finite;
  for (const auto& r : out)
    if (std::isfinite(r.vdt_days)) finite.push_back(r.vdt_days);
  if (!finite.empty()) {
    const std::vector<double> centered = vdt_median_centered(finite);
    std::size_t k = 0;
    for (auto& r : out)
      r.vdt_centered = std::isfinite(r.vdt_days)
                           ? centered[k++]
                           : std::numeric_limits<double>::quiet_NaN();
  } else {
    for (auto& r : out) r.vdt_centered = std::numeric_limits<double>::quiet_NaN();
  }

  if (out.size() >= 2) {
    std::vector<double> p2(out.size()), p1(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      p2[i] = out[i].linked.p2;
      p1[i] = out[i].linked.p1;
    }
    const std::vector<double> darcy = darcy_growth(p2, p1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].darcy = darcy[i];
  }
  return out;
}

std::vector<std::string> nelson_protocol_select(const std::vector<GrowthRecord>& records) {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (r.nodcat == Nodcat::indeterminate && r.volume_growth_pct >= 25.0)
      out.push_back(r.linked.patient_id);
  return out;
}

}  // namespace cadeval
