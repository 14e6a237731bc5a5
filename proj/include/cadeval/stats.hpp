#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace cadeval {

struct BootstrapResult {
  std::vector<double> replicates;  // length n_boot
  double point_estimate = 0.0;     // metric on the unresampled data
  double mean = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 2.5 / 97.5 percentiles, type-7
  int n_boot = 0;
  std::uint64_t seed = 0;
  std::int64_t n_skipped = 0;  // resamples redrawn because the metric was undefined
};

// A metric evaluated on a resample, given as indices into the unit list
// (with repetition). Returns nullopt when undefined there (e.g. the
// resample lost one class); such draws are redrawn.
using IndexMetric = std::function<std::optional<double>(const std::vector<std::int32_t>&)>;

// Percentile bootstrap over units 0..n_units-1. Replicate i derives its
// generator from (seed, i, attempt), so results are identical under any
// thread count. A replicate undefined after 100 redraws is an error, as is
// a metric undefined on the full data.
BootstrapResult bootstrap(const IndexMetric& metric, std::int32_t n_units,
                          int n_boot = 5000, std::uint64_t seed = 1);

// Single-threaded reference with identical output; kept for testing the
// parallel path against.
BootstrapResult bootstrap_serial(const IndexMetric& metric, std::int32_t n_units,
                                 int n_boot = 5000, std::uint64_t seed = 1);

// Evaluates two metrics on the SAME resamples (for paired comparison);
// draws are redrawn when either metric is undefined.
std::pair<BootstrapResult, BootstrapResult> bootstrap_shared(
    const IndexMetric& metric_a, const IndexMetric& metric_b, std::int32_t n_units,
    int n_boot = 5000, std::uint64_t seed = 1);

// One-sided Welch t-test, H1: mean(a) > mean(b). Welch-Satterthwaite
// degrees of freedom; p = 0.5 when both variances vanish with equal means.
double welch_one_sided(const std::vector<double>& a, const std::vector<double>& b);

// Expected calibration error over equal-width probability bins.
double ece(const std::vector<double>& scores, const std::vector<int>& labels,
           int n_bins = 10);

}  // namespace cadeval
