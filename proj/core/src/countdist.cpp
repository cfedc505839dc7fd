#include "bcpanel/countdist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcpanel/special.hpp"

namespace bcpanel {

namespace {

constexpr long kSumThreshold = 48;

double clamp_prob(double p) {
    return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

// Generic discrete quantile: exponential bracketing upward from a starting
// guess, then integer bisection for the smallest y with cdf(y) >= p.
template <typename Cdf>
long bracket_quantile(double p, long start, long cap, Cdf cdf) {
    p = clamp_prob(p);
    if (cdf(0) >= p) return 0;
    long lo = 0;                       // cdf(lo) < p
    long hi = std::max<long>(start, 1);
    while (cdf(hi) < p) {
        lo = hi;
        if (hi >= cap) return cap;     // unreachable once p is clamped
        hi = std::min(cap, 2 * hi + 1);
    }
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (cdf(mid) >= p) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

} // namespace

double lgamma_ratio(long y, double phi) {
    if (y <= 0) return 0.0;
    if (y <= kSumThreshold) {
        double s = 0.0;
        for (long k = 0; k < y; ++k) s += std::log(phi + static_cast<double>(k));
        return s;
    }
    return std::lgamma(static_cast<double>(y) + phi) - std::lgamma(phi);
}

double digamma_ratio(long y, double phi) {
    if (y <= 0) return 0.0;
    if (y <= kSumThreshold) {
        double s = 0.0;
        for (long k = 0; k < y; ++k) s += 1.0 / (phi + static_cast<double>(k));
        return s;
    }
    return digamma(static_cast<double>(y) + phi) - digamma(phi);
}

double negbin_logpmf(long y, double q, double phi) {
    if (y < 0) return -std::numeric_limits<double>::infinity();
    const double yd = static_cast<double>(y);
    return lgamma_ratio(y, phi) - std::lgamma(yd + 1.0) -
           phi * std::log1p(q / phi) + yd * (std::log(q) - std::log(phi + q));
}

double negbin_cdf(long y, double q, double phi) {
    if (y < 0) return 0.0;
    // P(Y <= y) = I_{phi/(phi+q)}(phi, y+1)
    return inc_beta(phi, static_cast<double>(y) + 1.0, phi / (phi + q));
}

long negbin_quantile(double p, double q, double phi) {
    const double sd = std::sqrt(q + q * q / phi);
    const long cap = static_cast<long>(std::ceil(q + 20.0 * sd)) + 1;
    const long start = static_cast<long>(std::ceil(q));
    return bracket_quantile(p, start, cap,
                            [&](long y) { return negbin_cdf(y, q, phi); });
}

double poisson_logpmf(long y, double mu) {
    if (y < 0) return -std::numeric_limits<double>::infinity();
    const double yd = static_cast<double>(y);
    return yd * std::log(mu) - mu - std::lgamma(yd + 1.0);
}

double poisson_cdf(long y, double mu) {
    if (y < 0) return 0.0;
    // P(Y <= y) = Q(y+1, mu)
    return inc_gamma_upper(static_cast<double>(y) + 1.0, mu);
}

long poisson_quantile(double p, double mu) {
    const long cap = static_cast<long>(std::ceil(mu + 20.0 * std::sqrt(mu))) + 32;
    const long start = static_cast<long>(std::ceil(mu));
    return bracket_quantile(p, start, cap,
                            [&](long y) { return poisson_cdf(y, mu); });
}

} // namespace bcpanel
