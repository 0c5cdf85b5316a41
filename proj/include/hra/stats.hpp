#pragma once

namespace hra::stats {

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double incomplete_beta(double a, double b, double x);

// P(F > f) for an F(d1, d2) variable. Returns 1 for f <= 0.
double f_upper_tail(double f, double d1, double d2);

// Standard normal quantile, p in (0, 1).
double normal_quantile(double p);

// Standard normal CDF.
double normal_cdf(double x);

}  // namespace hra::stats
