#include "cadeval/special.hpp"

#include <cmath>
#include <stdexcept>

#include "cadeval/error.hpp"

namespace cadeval {

double log_gamma(double x) { return std::lgamma(x); }

namespace {

// Lentz's continued fraction for the incomplete beta, as in Numerical
// Recipes; converges quickly when x < (a+1)/(a+b+2).
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double eps = 1e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw input_error("reg_inc_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw input_error("student_t_cdf: df <= 0");
  if (t == 0.0) return 0.5;
  double x = df / (df + t * t);
  double p = 0.5 * reg_inc_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - p : p;
}

double quantile_type7(const std::vector<double>& sorted_values, double q) {
  if (sorted_values.empty()) throw input_error("quantile_type7: empty input");
  if (q < 0.0 || q > 1.0) throw input_error("quantile_type7: q outside [0, 1]");
  const std::size_t n = sorted_values.size();
  if (n == 1) return sorted_values[0];
  double h = q * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo >= n - 1) return sorted_values[n - 1];
  double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

}  // namespace cadeval
