#pragma once
// Numerics shared across the statistics code: regularized incomplete beta
// (for Student-t tail probabilities) and type-7 interpolated quantiles.
#include <vector>

namespace cadeval {

double log_gamma(double x);

// Regularized incomplete beta I_x(a, b), continued fraction + symmetry.
double reg_inc_beta(double a, double b, double x);

// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Linear-interpolation quantile (numpy default / Hyndman-Fan type 7).
// `sorted_values` must be ascending and non-empty; q in [0, 1].
double quantile_type7(const std::vector<double>& sorted_values, double q);

}  // namespace cadeval
