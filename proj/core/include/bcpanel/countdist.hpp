#pragma once

namespace bcpanel {

// Negative binomial with mean q and variance q + q^2/phi.

double negbin_logpmf(long y, double q, double phi);

/// P(Y <= y) through the regularized incomplete beta; returns 0 for y < 0.
double negbin_cdf(long y, double q, double phi);

/// Smallest y with CDF(y) >= p. p is clamped to [1e-12, 1-1e-12]; the search
/// brackets exponentially from the mean and is capped at mean + 20 sd.
long negbin_quantile(double p, double q, double phi);

// Poisson with mean mu (plugs into the same copula machinery).

double poisson_logpmf(long y, double mu);
double poisson_cdf(long y, double mu);
long poisson_quantile(double p, double mu);

/// lgamma(y + phi) - lgamma(phi), exact summation for small integer y.
double lgamma_ratio(long y, double phi);

/// digamma(y + phi) - digamma(phi), exact summation for small integer y.
double digamma_ratio(long y, double phi);

} // namespace bcpanel
