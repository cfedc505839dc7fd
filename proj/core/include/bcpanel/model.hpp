#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcpanel/config.hpp"
#include "bcpanel/logdensity.hpp"
#include "bcpanel/panel.hpp"
#include "bcpanel/spline.hpp"

namespace bcpanel {

/// Half-normal scale sigma for 1/sqrt(phi) such that the prior probability
/// of 1 + mean/phi exceeding 3 is 0.05: sigma = sqrt(2/mean) / z_{0.975}.
double calibrate_dispersion_prior(double mean_counts);

/// Effective prior scales. Second arguments of the Gaussian priors are
/// variances; sd_multiplier scales the standard deviations of all Gaussian
/// priors but leaves the dispersion half-normals alone.
struct PriorSpec {
    double kappa_var = 50.0;
    double scalar_var = 10.0;
    double vector_var = 10.0;
    double sigma0 = 0.0;
    double sigma1 = 0.0;

    static PriorSpec resolve(const PriorConfig& config, const PanelData& panel);
};

/// Index map from named parameter blocks into the flat parameter vector.
/// Offsets are -1 for blocks a fit mode does not estimate. The unconstrained
/// vector stores log(1/sqrt(phi)) at the log_xi slots; constrained rows hold
/// phi itself there.
struct ParamLayout {
    int n_units = 0, n_times = 0, n_factors = 0, n_covariates = 0, n_basis = 0;
    FitMode mode = FitMode::Full;

    int kappa = -1, beta = -1, lambda = -1, v = -1, eta = -1;
    int log_xi0 = -1;
    int w = -1, theta1 = -1, theta_x = -1, log_xi1 = -1;
    int delta0 = -1, delta1 = -1, delta_lambda = -1, delta_x = -1;
    int total = 0;

    static ParamLayout create(int n_units, int n_times, int n_factors,
                              int n_covariates, int n_basis, FitMode mode);

    bool has_treatment_block() const { return w >= 0; }
    bool has_assignment_block() const { return delta0 >= 0; }

    std::vector<std::string> constrained_names() const;
    int index_of(const std::string& constrained_name) const;
};

/// One posterior draw on the constrained scale (phi at the log_xi slots).
struct ParamsRow {
    const ParamLayout* layout = nullptr;
    std::span<const double> row;

    double kappa(int i) const { return row[layout->kappa + i]; }
    double beta(int t0) const { return row[layout->beta + t0]; }
    double lambda(int i, int f) const {
        return row[layout->lambda + i * layout->n_factors + f];
    }
    double v(int t0, int f) const { return row[layout->v + t0 * layout->n_factors + f]; }
    double eta(int k) const { return row[layout->eta + k]; }
    double w(int b) const { return row[layout->w + b]; }
    double theta1() const { return row[layout->theta1]; }
    double theta_x(int k) const { return row[layout->theta_x + k]; }
    double phi0() const { return row[layout->log_xi0]; }
    double phi1() const { return row[layout->log_xi1]; }
    double delta0() const { return row[layout->delta0]; }
    double delta1() const { return row[layout->delta1]; }
    double delta_lambda(int f) const { return row[layout->delta_lambda + f]; }
    double delta_x(int k) const { return row[layout->delta_x + k]; }
};

// Linear predictors are capped at +/-40 before exponentiation; the sampler
// path treats an out-of-range predictor as a rejection instead.
inline constexpr double kLinearPredictorCap = 40.0;

/// exp(kappa_i + beta_t + lambda_i . V_t + eta . x_it), capped. 1-based t.
double mean_untreated(const ParamsRow& params, const PanelData& panel, int i, int t);

/// s(cum_a) + theta1 1{lockdown} + theta_x . x_it.
double treatment_term(const ParamsRow& params, const SplineBasis& basis,
                      double cum_a, bool in_lockdown, const double* x_it);

/// exp(lp_untreated + treatment term), capped. 1-based t.
double mean_treated(const ParamsRow& params, const PanelData& panel,
                    const SplineBasis& basis, const RunConfig& config, int i, int t);

/// log NegBin(y; q, phi) with mean q and variance q + q^2/phi.
double negbin_loglik(long y, double q, double phi);

/// Joint log posterior of the count panel model with analytic gradients.
///
/// full mode scores NB outcome terms for every cell (untreated mean before
/// first exposure, treated after) plus Poisson terms for the intervention
/// increments from t_min on; outcome_only drops the assignment block;
/// pre_intervention keeps only unexposed cells and estimates no treatment
/// parameters. An optional cell mask removes outcome terms (used by CV).
class PanelModel : public LogDensityModel {
public:
    PanelModel(const PanelData& panel, const RunConfig& config,
               const SplineBasis& basis, const PriorSpec& priors,
               std::vector<std::uint8_t> outcome_mask = {});

    int dim() const override { return layout_.total; }
    double log_density(std::span<const double> pos,
                       std::span<double> grad) const override;
    void initial_point(Rng& rng, std::span<double> out) const override;

    const ParamLayout& layout() const { return layout_; }
    const SplineBasis& basis() const { return basis_; }
    const PanelData& panel() const { return panel_; }
    const RunConfig& config() const { return config_; }
    const PriorSpec& priors() const { return priors_; }

    /// Map an unconstrained draw to the constrained scale (phi slots).
    void constrain(std::span<const double> unconstrained,
                   std::span<double> constrained) const;

private:
    PanelData panel_;
    RunConfig config_;
    SplineBasis basis_;
    PriorSpec priors_;
    ParamLayout layout_;
    std::vector<std::uint8_t> mask_;

    // Per-cell caches, row-major N x T.
    std::vector<double> cum_a_;
    std::vector<double> lgamma_y_;      // lgamma(y+1)
    std::vector<double> basis_cols_;    // n_basis values per exposed cell, else zeros
    std::vector<long> increments_;      // M_it
    std::vector<double> lgamma_m_;      // lgamma(M+1)
    std::vector<std::uint8_t> lockdown_t_;
    double prior_const_ = 0.0;

    double outcome_block(std::span<const double> x, std::span<double> grad,
                         bool& rejected) const;
    double assignment_block(std::span<const double> x, std::span<double> grad,
                            bool& rejected) const;
    double prior_block(std::span<const double> x, std::span<double> grad) const;
};

} // namespace bcpanel
