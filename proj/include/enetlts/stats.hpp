// Small statistics kernels: order statistics and chi-square quantiles.

#pragma once

#include "enetlts/types.hpp"

namespace enetlts {

// Median with the usual mid-average for even lengths. Takes a copy because
// selection reorders the data.
double median(Vector v);

// Median absolute deviation scaled by 1.4826 for consistency at the normal.
double mad(const Vector& v);

// Regularized lower incomplete gamma P(a, x), accurate to ~1e-14.
double gamma_p(double a, double x);

// Chi-square CDF with df degrees of freedom.
double chi2_cdf(double x, double df);

// Quantile of the chi-square distribution, solved by bisection on the CDF.
double chi2_quantile(double df, double p);

}  // namespace enetlts
