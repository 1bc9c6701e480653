#pragma once

namespace hydrofit {

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation (modified Lentz). Accurate to ~1e-12 for moderate a, b.
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of the F distribution with (d1, d2) degrees of freedom.
double f_cdf(double f, double d1, double d2);

/// Inverse CDF via bracketed bisection on f_cdf.
double f_quantile(double prob, double d1, double d2);

}  // namespace hydrofit
