#pragma once

#include <span>
#include <string>
#include <vector>

#include "bcpanel/copula.hpp"
#include "bcpanel/model.hpp"

namespace bcpanel {

/// Posterior summary of one scalar estimand: mean, central 95% credible
/// interval, and the posterior probability of exceeding the reference
/// (0 for difference-scale quantities, 1 for ratio-scale ones).
struct EstimandSummary {
    std::string name;
    double mean = 0.0;
    double cri_lo = 0.0;
    double cri_hi = 0.0;
    double p_positive = 0.0;
    long n_draws = 0;
    long n_excluded = 0; // draws dropped for a degenerate denominator
};

EstimandSummary summarize(const std::string& name, std::span<const double> draws,
                          double positivity_reference);

/// Per-draw tau_it = y_obs - y0 for one exposed cell.
std::vector<double> ite_draws(long y_obs, std::span<const long> y0_draws);

/// Per-draw aggregate effects over the exposed cells.
struct CumulativeEffects {
    std::vector<double> tau;        // sum of ITEs, all exposed cells
    std::vector<double> tau_c;      // sum over the lockdown window
    std::vector<double> share;      // tau_c / tau, zero-tau draws excluded
    long n_ratio_excluded = 0;
};
CumulativeEffects cumulative_effects(const PanelData& panel,
                                     const CounterfactualDraws& cf, int window_start,
                                     int window_end);

/// Per-draw percentage increase chi = 100 * sum(y - y0) / sum(y0); draws
/// with a zero denominator are excluded and counted.
struct PercentIncrease {
    std::vector<double> chi;
    long n_excluded = 0;
};
PercentIncrease percent_increase(const PanelData& panel, const CounterfactualDraws& cf);

/// Rate ratio omega = exp(s(cum_a)) * exp(theta1 1{lockdown}) [* exp(theta_x x)]
/// for one parameter draw.
double rate_ratio(const ParamsRow& params, const SplineBasis& basis, double cum_a,
                  bool in_lockdown, const double* x = nullptr);

/// Mixed average intervention effect: the mean of omega over the observed
/// exposed cells (empirical covariate distribution), per draw.
std::vector<double> mixed_average_effect(const std::vector<double>& constrained_rows,
                                         const ParamLayout& layout,
                                         const PanelData& panel,
                                         const SplineBasis& basis,
                                         const RunConfig& config);

/// One row of the omega grid report.
struct OmegaGridRow {
    double cum_a = 0.0;
    bool lockdown = false;
    EstimandSummary summary;
};

/// omega over the integer grid 0..max observed cumulative exposure, with and
/// without the lockdown term.
std::vector<OmegaGridRow> omega_grid(const std::vector<double>& constrained_rows,
                                     const ParamLayout& layout, const PanelData& panel,
                                     const SplineBasis& basis, const RunConfig& config);

/// Full estimand report for one counterfactual set.
struct EstimandReport {
    std::vector<EstimandSummary> scalars; // tau, tau_c, share, chi, tau_m, ...
    std::vector<std::pair<std::pair<int, int>, EstimandSummary>> ite; // per cell
};

EstimandReport estimand_report(const std::vector<double>& constrained_rows,
                               const ParamLayout& layout, const PanelData& panel,
                               const SplineBasis& basis, const RunConfig& config,
                               const CounterfactualDraws& cf);

} // namespace bcpanel
