#pragma once

#include <cstdint>
#include <random>

namespace bcpanel {

/// Deterministic random stream with explicit variate algorithms.
///
/// All variates are generated from a mt19937_64 engine through fixed
/// algorithms implemented here (not std::*_distribution), so a given
/// (seed, call sequence) produces bit-identical results across builds on
/// one platform. Substreams are derived from a master seed with
/// derive_seed, which mixes the stream index through splitmix64.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1); never returns an exact endpoint.
    double uniform_pos();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via the Marsaglia polar method.
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Gamma(shape, 1) via Marsaglia–Tsang; shape > 0.
    double gamma(double shape);

    /// Poisson(mean) — inversion for small means, PTRS rejection otherwise.
    long poisson(double mean);

    /// NegBin(mean q, dispersion phi) as a gamma–Poisson mixture.
    long negbin(double q, double phi);

private:
    std::mt19937_64 engine_;
};

} // namespace bcpanel
