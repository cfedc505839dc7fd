#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "bcpanel/config.hpp"
#include "bcpanel/model.hpp"
#include "bcpanel/rng.hpp"

namespace bcpanel {

/// Discrete marginal plugged into the copula: a CDF over integers and the
/// matching quantile. NB marginals serve the main model; Poisson marginals
/// serve the simulation study.
struct DiscreteMarginal {
    std::function<double(long)> cdf;
    std::function<long(double)> quantile;
};

/// One draw of the untreated potential outcome behind observed y_obs, via a
/// bivariate Gaussian copula with correlation rho:
///   u  ~ Uniform(F1(y_obs - 1), F1(y_obs)),  F1(-1) = 0
///   z1 = Phi^{-1}(u),  z0 ~ Normal(rho z1, 1 - rho^2)
///   y0 = min{ y : F0(y) >= Phi(z0) }
/// u and Phi(z0) are clamped to [1e-12, 1-1e-12] before the inversions.
long copula_impute(long y_obs, const DiscreteMarginal& treated,
                   const DiscreteMarginal& untreated, double rho, Rng& rng);

/// Same recipe with NB marginals inline (hot path for the panel model).
long copula_impute_negbin(long y_obs, double q1, double phi1, double q0, double phi0,
                          double rho, Rng& rng);
long copula_impute_poisson(long y_obs, double mu1, double mu0, double rho, Rng& rng);

/// Imputed untreated potential outcomes for every exposed cell and retained
/// draw. rho is resampled from the prior once per draw; a pre-intervention
/// fit has no treated marginal, so Y(0) is drawn from NB(q0, phi0) directly
/// and rho_used records 0.
struct CounterfactualDraws {
    std::vector<std::pair<int, int>> cells; // 1-based (unit, time)
    long n_draws = 0;
    std::vector<long> y0;                   // n_draws x cells
    std::vector<double> rho_used;           // per draw

    long y0_at(long d, std::size_t cell) const { return y0[d * cells.size() + cell]; }
};

/// draws holds constrained parameter rows (layout order) for the model that
/// produced them.
CounterfactualDraws impute_y0(const std::vector<double>& constrained_rows,
                              const ParamLayout& layout, const PanelData& panel,
                              const SplineBasis& basis, const RunConfig& config,
                              const RhoPrior& rho_prior, std::uint64_t seed,
                              int threads = 0);

} // namespace bcpanel
