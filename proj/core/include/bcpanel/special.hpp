#pragma once

namespace bcpanel {

/// psi(x) for x > 0, via recurrence shift and asymptotic series.
double digamma(double x);

/// Standard normal CDF.
double norm_cdf(double x);

/// Standard normal quantile; p is clamped to [1e-300, 1 - 1e-16].
double norm_quantile(double p);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double inc_beta(double a, double b, double x);

/// Regularized lower incomplete gamma P(a, x).
double inc_gamma_lower(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double inc_gamma_upper(double a, double x);

} // namespace bcpanel
