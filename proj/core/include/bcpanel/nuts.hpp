#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bcpanel/config.hpp"
#include "bcpanel/logdensity.hpp"

namespace bcpanel {

struct SamplerConfig {
    int n_chains = 2;
    long n_iter = 100000;  // total per chain, warm-up included
    long n_warmup = 50000;
    int thin = 5;
    double target_accept = 0.8;
    int max_tree_depth = 10;
    std::uint64_t seed = 1;
    int threads = 0; // 0 = one thread per chain up to hardware_concurrency

    static SamplerConfig from(const McmcConfig& mcmc, int threads = 0);
    void validate(int model_dim) const;
};

struct ChainStats {
    double step_size = 0.0;
    double mean_accept = 0.0;
    long divergences = 0;     // post-warmup iterations that diverged
    long max_depth_hits = 0;  // post-warmup iterations that hit max depth
};

/// Retained draws from all chains, chain-major, on the unconstrained scale.
struct PosteriorDraws {
    int dim = 0;
    int n_chains = 0;
    long per_chain = 0;
    std::vector<double> draws; // (n_chains * per_chain) x dim
    std::vector<double> lp;
    std::vector<std::uint8_t> divergent;
    std::vector<int> chain_id;
    std::vector<ChainStats> chain_stats;

    long n_rows() const { return static_cast<long>(n_chains) * per_chain; }
    std::span<const double> row(long d) const {
        return {draws.data() + d * dim, static_cast<std::size_t>(dim)};
    }
    long total_divergent() const;
    double divergence_rate() const;

    /// Column col as one series per chain (for R-hat / ESS).
    std::vector<std::vector<double>> split_by_chain(int col) const;
};

/// Dynamic-trajectory Hamiltonian sampler: multinomial state selection along
/// the trajectory, U-turn termination, dual-averaging step size toward
/// target_accept, and windowed diagonal mass-matrix adaptation during
/// warm-up (15% step-size-only, 75% doubling covariance windows, 10% final
/// step-size). A transition with energy error above 1000 is flagged as
/// divergent and retained. Chains run concurrently with per-chain RNG
/// streams derived from the master seed, so results are independent of the
/// thread schedule.
PosteriorDraws run_chains(const LogDensityModel& model, const SamplerConfig& config);

} // namespace bcpanel
