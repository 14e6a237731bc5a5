#include "cadeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cadeval/error.hpp"
#include "cadeval/rng.hpp"
#include "cadeval/special.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cadeval {
namespace {

constexpr int kMaxRedraws = 100;

// Draws replicate i (redrawing while any metric is undefined) from a
// generator keyed by (seed, i, attempt): replicate content never depends on
// scheduling, only on its own index.
bool one_replicate(const IndexMetric& metric_a, const IndexMetric* metric_b,
                   std::int32_t n_units, std::uint64_t seed, int i,
                   double& out_a, double& out_b, std::int64_t& redraws) {
  std::vector<std::int32_t> idx(static_cast<std::size_t>(n_units));
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(attempt)));
    for (auto& v : idx)
      v = static_cast<std::int32_t>(rng.uniform_index(static_cast<std::uint64_t>(n_units)));
    auto va = metric_a(idx);
    if (!va) {
      ++redraws;
      continue;
    }
    if (metric_b) {
      auto vb = (*metric_b)(idx);
      if (!vb) {
        ++redraws;
        continue;
      }
      out_b = *vb;
    }
    out_a = *va;
    return true;
  }
  return false;
}

void finalize(BootstrapResult& r) {
  double sum = 0.0;
  for (double v : r.replicates) sum += v;
  r.mean = sum / static_cast<double>(r.replicates.size());
  std::vector<double> sorted = r.replicates;
  std::sort(sorted.begin(), sorted.end());
  r.ci_low = quantile_type7(sorted, 0.025);
  r.ci_high = quantile_type7(sorted, 0.975);
}

std::vector<std::int32_t> identity_indices(std::int32_t n_units) {
  std::vector<std::int32_t> idx(static_cast<std::size_t>(n_units));
  for (std::int32_t i = 0; i < n_units; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

std::pair<BootstrapResult, BootstrapResult> bootstrap_core(
    const IndexMetric& metric_a, const IndexMetric* metric_b, std::int32_t n_units,
    int n_boot, std::uint64_t seed, bool parallel) {
  if (n_units <= 0) throw input_error("bootstrap: no resampling units");
  if (n_boot <= 0) throw input_error("bootstrap: n_boot must be positive");

  const auto full = identity_indices(n_units);
  auto pa = metric_a(full);
  if (!pa) throw input_error("bootstrap: metric undefined on the full data");
  std::optional<double> pb;
  if (metric_b) {
    pb = (*metric_b)(full);
    if (!pb) throw input_error("bootstrap: second metric undefined on the full data");
  }

  std::vector<double> ra(static_cast<std::size_t>(n_boot));
  std::vector<double> rb(metric_b ? static_cast<std::size_t>(n_boot) : 0);
  std::vector<std::int64_t> redraws(static_cast<std::size_t>(n_boot), 0);
  std::vector<char> ok(static_cast<std::size_t>(n_boot), 0);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int i = 0; i < n_boot; ++i) {
    double b = 0.0;
    ok[static_cast<std::size_t>(i)] =
        one_replicate(metric_a, metric_b, n_units, seed, i,
                      ra[static_cast<std::size_t>(i)], b,
                      redraws[static_cast<std::size_t>(i)])
            ? 1
            : 0;
    if (metric_b) rb[static_cast<std::size_t>(i)] = b;
  }
  for (char o : ok)
    if (!o)
      throw input_error("bootstrap: metric undefined after " +
                        std::to_string(kMaxRedraws) + " redraws of a resample");

  std::int64_t skipped = 0;
  for (std::int64_t r : redraws) skipped += r;

  BootstrapResult a;
  a.replicates = std::move(ra);
  a.point_estimate = *pa;
  a.n_boot = n_boot;
  a.seed = seed;
  a.n_skipped = skipped;
  finalize(a);

  BootstrapResult b;
  if (metric_b) {
    b.replicates = std::move(rb);
    b.point_estimate = *pb;
    b.n_boot = n_boot;
    b.seed = seed;
    b.n_skipped = skipped;
    finalize(b);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace

BootstrapResult bootstrap(const IndexMetric& metric, std::int32_t n_units, int n_boot,
                          std::uint64_t seed) {
  return bootstrap_core(metric, nullptr, n_units, n_boot, seed, true).first;
}

BootstrapResult bootstrap_serial(const IndexMetric& metric, std::int32_t n_units,
                                 int n_boot, std::uint64_t seed) {
  return bootstrap_core(metric, nullptr, n_units, n_boot, seed, false).first;
}

std::pair<BootstrapResult, BootstrapResult> bootstrap_shared(
    const IndexMetric& metric_a, const IndexMetric& metric_b, std::int32_t n_units,
    int n_boot, std::uint64_t seed) {
  return bootstrap_core(metric_a, &metric_b, n_units, n_boot, seed, true);
}

double welch_one_sided(const std::vector<double>& a, const std::vector<double>& b) {
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  if (a.size() < 2 || b.size() < 2)
    throw input_error("welch test: need at least 2 values per side");
  double ma = 0, mb = 0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= na;
  mb /= nb;
  double va = 0, vb = 0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= (na - 1.0);
  vb /= (nb - 1.0);

  // a constant sample has zero variance even when the accumulated mean
  // carries roundoff (three 0.7s sum to 2.0999999999999996)
  if (std::equal(a.begin() + 1, a.end(), a.begin())) { ma = a.front(); va = 0.0; }
  if (std::equal(b.begin() + 1, b.end(), b.begin())) { mb = b.front(); vb = 0.0; }

  if (va == 0.0 && vb == 0.0) {
    if (ma == mb) return 0.5;
    return ma > mb ? 0.0 : 1.0;
  }
  const double sa = va / na, sb = vb / nb;
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df =
      (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  // survival P(T >= t) through the symmetric CDF, so p(a,b) + p(b,a) == 1
  return student_t_cdf(-t, df);
}

double ece(const std::vector<double>& scores, const std::vector<int>& labels, int n_bins) {
  if (scores.size() != labels.size()) throw input_error("ece: length mismatch");
  if (scores.empty()) throw input_error("ece: empty input");
  if (n_bins < 1) throw input_error("ece: n_bins must be >= 1");
  std::vector<double> count(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> sum_score(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> sum_label(static_cast<std::size_t>(n_bins), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (!(s >= 0.0 && s <= 1.0)) throw input_error("ece: scores must lie in [0,1]");
    auto bin = static_cast<std::size_t>(
        std::min(static_cast<int>(s * n_bins), n_bins - 1));
    count[bin] += 1.0;
    sum_score[bin] += s;
    sum_label[bin] += labels[i] ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(scores.size());
  double out = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0.0) continue;
    out += (count[b] / n) * std::abs(sum_score[b] / count[b] - sum_label[b] / count[b]);
  }
  return out;
}

}  // namespace cadeval
