#include "cadeval/subgroup.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <mutex>
#include <optional>
#include <set>

#include "cadeval/error.hpp"
#include "cadeval/report.hpp"

#ifndef CADEVAL_DATA_DIR
#define CADEVAL_DATA_DIR "data"
#endif

namespace cadeval {
namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

// vendor key used by the kernel data file; "" when not covered
std::string vendor_key(const std::string& manufacturer) {
  const std::string m = upper(trim(manufacturer));
  if (starts_with(m, "SIEMENS")) return "siemens";
  if (starts_with(m, "TOSHIBA")) return "toshiba";
  if (starts_with(m, "PHILIPS")) return "philips";
  if (starts_with(m, "GE")) return "ge";
  return "";
}

struct KernelTables {
  // tier -> vendor -> kernels; one set of exact strings, one trimmed
  std::map<std::string, std::map<std::string, std::set<std::string>>> exact;
  std::map<std::string, std::map<std::string, std::set<std::string>>> trimmed;
};

const KernelTables& kernel_tables(const std::string& path) {
  static std::mutex mu;
  static std::map<std::string, KernelTables> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(path);
  if (it != cache.end()) return it->second;
  KernelTables t;
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw input_error(path + ": " + e.what());
  }
  for (auto& [tier, vendors] : j.items()) {
    if (!vendors.is_object()) throw input_error(path + ": tier must map vendors to lists");
    for (auto& [vendor, list] : vendors.items()) {
      if (!list.is_array()) throw input_error(path + ": kernel list must be an array");
      for (auto& k : list) {
        if (!k.is_string()) throw input_error(path + ": kernel names must be strings");
        t.exact[tier][vendor].insert(k.get<std::string>());
        t.trimmed[tier][vendor].insert(trim(k.get<std::string>()));
      }
    }
  }
  return cache.emplace(path, std::move(t)).first->second;
}

const char* kTiers[] = {"extra_sharp", "sharp", "smooth"};

std::string group_or(const std::optional<double>& v, const std::vector<BinSpec>& bins) {
  if (!v) return "unknown";
  for (const auto& b : bins)
    if (*v >= b.lo && (*v < b.hi || (b.hi_closed && *v == b.hi))) return bin_label(b);
  return "out_of_range";
}

}  // namespace

std::string bin_label(const BinSpec& b) {
  return "[" + fmt_g(b.lo) + "," + fmt_g(b.hi) + (b.hi_closed ? "]" : ")");
}

std::vector<BinSpec> default_bins(const std::string& axis,
                                  const std::string& slice_convention) {
  if (axis == "diameter_range")
    return {{4, 10, false}, {10, 20, false}, {20, 30, true}};
  if (axis == "age_band")
    return {{0, 50, false}, {50, 60, false}, {60, 70, false}, {70, 130, true}};
  if (axis == "slice_thickness") {
    if (slice_convention == "ic")
      return {{0.5, 0.8, false}, {0.8, 1.5, false}, {1.5, 3, true}};
    if (slice_convention == "nlst")
      return {{0.5, 1.5, false}, {1.5, 2.3, false}, {2.3, 3.5, true}};
    throw input_error("unknown slice convention: " + slice_convention);
  }
  return {};
}

std::string kernel_sharpness(const std::string& manufacturer, const std::string& kernel,
                             const std::string& data_path) {
  const std::string path =
      data_path.empty() ? std::string(CADEVAL_DATA_DIR) + "/kernel_sharpness.json"
                        : data_path;
  const KernelTables& t = kernel_tables(path);
  const std::string vendor = vendor_key(manufacturer);
  if (vendor.empty()) return "unknown";
  for (const char* tier : kTiers) {
    auto ti = t.exact.find(tier);
    if (ti == t.exact.end()) continue;
    auto vi = ti->second.find(vendor);
    if (vi != ti->second.end() && vi->second.count(kernel)) return tier;
  }
  const std::string k = trim(kernel);
  for (const char* tier : kTiers) {
    auto ti = t.trimmed.find(tier);
    if (ti == t.trimmed.end()) continue;
    auto vi = ti->second.find(vendor);
    if (vi != ti->second.end() && vi->second.count(k)) return tier;
  }
  return "unknown";
}

StratifyResult stratify(const Cohort& cohort, const StratifierConfig& config) {
  StratifyResult res;
  res.axis = config.axis;
  const std::set<std::string> patient_axes = {"diameter_range", "stage_group", "sex",
                                              "age_band", "dataset", "copd"};
  const std::set<std::string> scan_axes = {"manufacturer", "slice_thickness",
                                           "kernel_sharpness"};
  if (patient_axes.count(config.axis))
    res.unit = "patient";
  else if (scan_axes.count(config.axis))
    res.unit = "scan";
  else
    throw input_error("unknown stratification axis: " + config.axis);

  std::vector<BinSpec> bins = config.bins;
  if (bins.empty()) bins = default_bins(config.axis, config.slice_convention);

  if (res.unit == "scan") {
    for (const auto& s : cohort.scans) {
      std::string g;
      if (config.axis == "manufacturer") {
        const std::string m = upper(trim(s.manufacturer));
        g = m.empty() ? "unknown" : (starts_with(m, "SIEMENS") ? "SIEMENS" : m);
      } else if (config.axis == "slice_thickness") {
        g = group_or(s.slice_thickness, bins);
      } else {  // kernel_sharpness
        g = s.kernel.empty() ? "unknown"
                             : kernel_sharpness(s.manufacturer, s.kernel,
                                                config.kernel_data_path);
      }
      res.groups[g].push_back(s.scan_id);
    }
    return res;
  }

  // patient axes; diameter needs the sizes of each patient's findings
  std::map<std::string, std::string> scan_to_patient;
  for (const auto& s : cohort.scans) scan_to_patient.emplace(s.scan_id, s.patient_id);
  std::map<std::string, double> largest;  // patient -> max diameter
  if (config.axis == "diameter_range") {
    auto feed = [&](const std::string& scan_id, const std::optional<double>& d) {
      if (!d) return;
      auto it = scan_to_patient.find(scan_id);
      if (it == scan_to_patient.end()) return;
      auto [slot, fresh] = largest.emplace(it->second, *d);
      if (!fresh) slot->second = std::max(slot->second, *d);
    };
    if (config.use_model_diameter)
      for (const auto& d : cohort.detections) feed(d.scan_id, d.diameter_mm);
    else
      for (const auto& g : cohort.gt_nodules) feed(g.scan_id, g.diameter_mm);
  }

  for (const auto& p : cohort.patients) {
    std::string g;
    if (config.axis == "diameter_range") {
      auto it = largest.find(p.patient_id);
      g = group_or(it == largest.end() ? std::nullopt : std::optional<double>(it->second),
                   bins);
    } else if (config.axis == "stage_group") {
      if (!p.cancer_status)
        g = "non_cancer";
      else if (!p.stage || trim(*p.stage).empty())
        g = "unknown";
      else {
        const std::string st = upper(trim(*p.stage));
        g = starts_with(st, "1A") ? "1A" : starts_with(st, "1B") ? "1B" : "late";
      }
    } else if (config.axis == "sex") {
      g = to_string(p.sex);
    } else if (config.axis == "age_band") {
      g = group_or(p.age, bins);
    } else if (config.axis == "dataset") {
      g = p.dataset.empty() ? "unknown" : p.dataset;
    } else {  // copd
      g = !p.copd ? "unknown" : (*p.copd ? "copd" : "no_copd");
    }
    res.groups[g].push_back(p.patient_id);
  }
  return res;
}

std::map<std::string, std::vector<std::string>> with_stage_composite(
    const StratifyResult& stage_result) {
  auto groups = stage_result.groups;
  std::vector<std::string> stage1;
  auto append = [&](const char* key) {
    auto it = stage_result.groups.find(key);
    if (it != stage_result.groups.end())
      stage1.insert(stage1.end(), it->second.begin(), it->second.end());
  };
  append("1A");
  append("1B");
  if (!stage1.empty()) groups.emplace("1", std::move(stage1));
  return groups;
}

}  // namespace cadeval
