#pragma once

#include <cstdint>
#include <string>

#include "bcpanel/rng.hpp"

namespace bcpanel {

struct PanelData;

enum class FitMode {
    Full,            // outcome + intervention-assignment likelihood
    OutcomeOnly,     // cut posterior: assignment terms dropped
    PreIntervention, // unexposed cells only; no treatment parameters
};

std::string to_string(FitMode mode);
FitMode fit_mode_from_string(const std::string& s);

/// Prior for the copula correlation between potential outcomes: a point
/// mass or a uniform over a subinterval of [-1, 1].
struct RhoPrior {
    enum class Kind { Point, Uniform };
    Kind kind = Kind::Point;
    double value = 0.0; // point mass location
    double lo = -1.0;   // uniform bounds
    double hi = 1.0;

    double draw(Rng& rng) const {
        return kind == Kind::Point ? value : rng.uniform(lo, hi);
    }
    std::string str() const;

    /// Parse "point:0.75" or "uniform:-1,1".
    static RhoPrior parse(const std::string& text);
};

struct McmcConfig {
    int chains = 2;
    long iterations = 100000; // total per chain, warm-up included
    long warmup = 50000;
    int thin = 5;
    double target_accept = 0.8;
    int max_tree_depth = 10;
    std::uint64_t seed = 1;

    long retained_per_chain() const { return (iterations - warmup) / thin; }
    void validate() const;
};

struct PriorConfig {
    double kappa_var = 50.0;
    double scalar_var = 10.0;
    double vector_var = 10.0;
    double sigma0 = 0.0;       // half-normal scale for 1/sqrt(phi0); 0 = calibrate
    double sigma1 = 0.0;       // half-normal scale for 1/sqrt(phi1); 0 = calibrate
    double sd_multiplier = 1.0; // sensitivity knob; does not touch dispersions
};

struct RunConfig {
    int n_factors = 1;
    int spline_degree = 3;
    int n_interior_knots = 3;
    int lockdown_start = 0; // 1-based inclusive window
    int lockdown_end = 0;
    int t_min = 0;          // 0 = earliest observed first exposure
    FitMode fit_mode = FitMode::Full;
    RhoPrior rho_prior;
    McmcConfig mcmc;
    PriorConfig priors;

    bool in_lockdown(int t) const { return t >= lockdown_start && t <= lockdown_end; }

    /// Checks internal consistency; panel-dependent checks happen in
    /// resolve_against.
    void validate() const;

    /// Fill t_min from the panel when unset and check window/t_min bounds.
    void resolve_against(const PanelData& panel);
};

/// Flat key-value config with sections [model] [mcmc] [priors] [copula].
RunConfig load_config(const std::string& path);
std::string config_to_text(const RunConfig& config);
void write_config(const RunConfig& config, const std::string& path);

} // namespace bcpanel
