#include "bcpanel/copula.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "bcpanel/countdist.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/special.hpp"
#include "bcpanel/threading.hpp"

namespace bcpanel {

namespace {

double clamp_u(double u) {
    return std::clamp(u, 1e-12, 1.0 - 1e-12);
}

template <typename Cdf1, typename Quantile0>
long impute_impl(long y_obs, Cdf1 cdf1, Quantile0 quantile0, double rho, Rng& rng) {
    const double lo = y_obs > 0 ? cdf1(y_obs - 1) : 0.0;
    const double hi = cdf1(y_obs);
    const double u = clamp_u(rng.uniform(lo, hi));
    const double z1 = norm_quantile(u);
    double z0;
    if (rho >= 1.0) {
        z0 = z1;
    } else if (rho <= -1.0) {
        z0 = -z1;
    } else {
        z0 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
    }
    return quantile0(clamp_u(norm_cdf(z0)));
}

} // namespace

long copula_impute(long y_obs, const DiscreteMarginal& treated,
                   const DiscreteMarginal& untreated, double rho, Rng& rng) {
    return impute_impl(y_obs, treated.cdf, untreated.quantile, rho, rng);
}

long copula_impute_negbin(long y_obs, double q1, double phi1, double q0, double phi0,
                          double rho, Rng& rng) {
    return impute_impl(
        y_obs, [&](long y) { return negbin_cdf(y, q1, phi1); },
        [&](double p) { return negbin_quantile(p, q0, phi0); }, rho, rng);
}

long copula_impute_poisson(long y_obs, double mu1, double mu0, double rho, Rng& rng) {
    return impute_impl(
        y_obs, [&](long y) { return poisson_cdf(y, mu1); },
        [&](double p) { return poisson_quantile(p, mu0); }, rho, rng);
}

CounterfactualDraws impute_y0(const std::vector<double>& constrained_rows,
                              const ParamLayout& layout, const PanelData& panel,
                              const SplineBasis& basis, const RunConfig& config,
                              const RhoPrior& rho_prior, std::uint64_t seed,
                              int threads) {
    CounterfactualDraws out;
    out.cells = panel.exposed_cells();
    if (out.cells.empty()) {
        throw ValidationError("no exposed cells: nothing to impute");
    }
    const std::size_t n_cells = out.cells.size();
    const int dim = layout.total;
    if (constrained_rows.size() % dim != 0) {
        throw ValidationError("draw matrix does not match the parameter layout");
    }
    out.n_draws = static_cast<long>(constrained_rows.size() / dim);
    out.y0.assign(out.n_draws * n_cells, 0);
    out.rho_used.assign(out.n_draws, 0.0);

    const bool pre_mode = layout.mode == FitMode::PreIntervention;

    // Pre-resolve cell geometry once.
    std::vector<double> cum(n_cells);
    std::vector<std::uint8_t> lockdown(n_cells);
    std::vector<long> y_obs(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        const int i = out.cells[c].first - 1;
        const int t = out.cells[c].second;
        cum[c] = panel.cum_exposure(i, t);
        lockdown[c] = config.in_lockdown(t) ? 1 : 0;
        y_obs[c] = panel.y_at(i, t - 1);
    }

    parallel_for(out.n_draws, threads, [&](long d) {
        Rng rng(Rng::derive_seed(seed, static_cast<std::uint64_t>(d)));
        const ParamsRow row{&layout,
                            {constrained_rows.data() + static_cast<std::size_t>(d) * dim,
                             static_cast<std::size_t>(dim)}};
        const double rho = pre_mode ? 0.0 : rho_prior.draw(rng);
        out.rho_used[d] = rho;
        for (std::size_t c = 0; c < n_cells; ++c) {
            const int i = out.cells[c].first - 1;
            const int t = out.cells[c].second;
            const double q0 = mean_untreated(row, panel, i, t);
            long y0;
            if (pre_mode) {
                // No treated marginal was fitted; sample NB(q0, phi0) directly.
                y0 = negbin_quantile(rng.uniform_pos(), q0, row.phi0());
            } else {
                const double psi = treatment_term(row, basis, cum[c], lockdown[c] != 0,
                                                  panel.x_row(i, t - 1));
                const double q1 = std::exp(std::clamp(std::log(q0) + psi,
                                                      -kLinearPredictorCap,
                                                      kLinearPredictorCap));
                y0 = copula_impute_negbin(y_obs[c], q1, row.phi1(), q0, row.phi0(), rho,
                                          rng);
            }
            out.y0[d * n_cells + c] = y0;
        }
    });
    return out;
}

} // namespace bcpanel
