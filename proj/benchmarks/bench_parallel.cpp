// Times the OpenMP bootstrap against the single-threaded reference on the
// same workload and verifies both produce identical replicates.
//
//   bench_parallel [n_units] [n_boot]
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <vector>

#include "cadeval/metrics.hpp"
#include "cadeval/parallel.hpp"
#include "cadeval/rng.hpp"
#include "cadeval/stats.hpp"

using namespace cadeval;

int main(int argc, char** argv) {
  const std::int32_t n_units = argc > 1 ? std::atoi(argv[1]) : 4000;
  const int n_boot = argc > 2 ? std::atoi(argv[2]) : 2000;

  Rng rng(12345);
  std::vector<int> labels(static_cast<std::size_t>(n_units));
  std::vector<double> scores(static_cast<std::size_t>(n_units));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<int>(i % 2);
    scores[i] = labels[i] ? rng.beta(4, 2) : rng.beta(2, 4);
  }
  const IndexMetric metric =
      [&](const std::vector<std::int32_t>& idx) -> std::optional<double> {
    bool pos = false, neg = false;
    for (std::int32_t i : idx) (labels[static_cast<std::size_t>(i)] ? pos : neg) = true;
    if (!pos || !neg) return std::nullopt;
    std::vector<int> l(idx.size());
    std::vector<double> s(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      l[k] = labels[static_cast<std::size_t>(idx[k])];
      s[k] = scores[static_cast<std::size_t>(idx[k])];
    }
    return auc_fast(l, s);
  };

  std::printf("bootstrap AUC, %d units x %d replicates\n", n_units, n_boot);

  const double t_serial = wall_time();
  const BootstrapResult serial = bootstrap_serial(metric, n_units, n_boot, 99);
  const double serial_s = wall_time() - t_serial;
  std::printf("  serial reference : %7.3f s  (ci %.4f..%.4f)\n", serial_s, serial.ci_low,
              serial.ci_high);

  const int hw = max_threads();
  for (int threads : {1, hw}) {
    set_threads(threads);
    const double t0 = wall_time();
    const BootstrapResult par = bootstrap(metric, n_units, n_boot, 99);
    const double dt = wall_time() - t0;
    const bool same = par.replicates == serial.replicates && par.ci_low == serial.ci_low &&
                      par.ci_high == serial.ci_high;
    std::printf("  parallel, %2d thr : %7.3f s  speedup %.2fx  replicates %s\n", threads,
                dt, serial_s / dt, same ? "identical" : "DIFFER");
    if (!same) return 1;
  }
  set_threads(hw);
  return 0;
}
