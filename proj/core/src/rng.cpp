#include "bcpanel/rng.hpp"

#include <cmath>

namespace bcpanel {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t Rng::derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t state = master;
    std::uint64_t a = splitmix64(state);
    state ^= stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = splitmix64(state);
    return a ^ (b + 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform_pos() {
    double u;
    do {
        u = uniform01();
    } while (u <= 0.0);
    return u;
}

double Rng::normal() {
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

double Rng::gamma(double shape) {
    if (shape < 1.0) {
        // Boost to shape+1 and scale back.
        double u = uniform_pos();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

long Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
        // Multiplicative inversion.
        const double limit = std::exp(-mean);
        double prod = 1.0;
        long k = 0;
        for (;;) {
            prod *= uniform01();
            if (prod <= limit) return k;
            ++k;
        }
    }
    // PTRS transformed rejection (Hoermann 1993).
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
        double u = uniform01() - 0.5;
        double v = uniform01();
        double us = 0.5 - std::fabs(u);
        double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mean - mean - std::lgamma(k + 1.0)) {
            return static_cast<long>(kf);
        }
    }
}

long Rng::negbin(double q, double phi) {
    const double rate = gamma(phi) * (q / phi);
    return poisson(rate);
}

} // namespace bcpanel
