#pragma once
// Counter-based deterministic RNG. All randomness in the library flows
// through this so that results are bit-identical across platforms and
// thread counts; std:: distributions are implementation-defined and
// would break that.
#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace cadeval {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mix an arbitrary list of counters into one stream seed. Used to derive
// independent streams per (seed, replicate, attempt) etc. without any
// sequential state shared between parallel workers.
inline std::uint64_t mix_seed(std::uint64_t a) { return splitmix64(a); }
template <class... Rest>
inline std::uint64_t mix_seed(std::uint64_t a, Rest... rest) {
  return splitmix64(a ^ mix_seed(static_cast<std::uint64_t>(rest)...));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Rejection keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller; one value per call (the pair's partner is discarded so
  // the stream position stays a simple function of the call count).
  double normal() {
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

  // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape <= 0");
    if (shape < 1.0) {
      double u = uniform01();
      while (u <= 0.0) u = uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  // Inversion for small mean, PTRS-free simple loop is fine for our rates.
  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: mean < 0");
    if (mean == 0.0) return 0;
    double L = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > L);
    return k - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace cadeval
