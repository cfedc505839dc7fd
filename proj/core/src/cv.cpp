#include "bcpanel/cv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcpanel/artifact.hpp"
#include "bcpanel/diagnostics.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/model.hpp"
#include "bcpanel/nuts.hpp"
#include "bcpanel/spline.hpp"
#include "bcpanel/threading.hpp"

namespace bcpanel {

double interval_score(double y, double lo, double hi, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("interval score: bad alpha");
    if (hi < lo) throw ValidationError("interval score: hi < lo");
    double score = hi - lo;
    if (y < lo) score += 2.0 / alpha * (lo - y);
    if (y > hi) score += 2.0 / alpha * (y - hi);
    return score;
}

std::vector<std::pair<int, int>> make_cv_mask(const PanelData& panel, Rng& rng) {
    std::vector<std::pair<int, int>> mask;
    for (int i = 0; i < panel.n_units; ++i) {
        if (panel.first_exposure[i] > panel.n_times) continue; // control unit
        if (panel.n_times < 2) {
            throw ValidationError("exposed unit with a single period cannot be masked");
        }
        const int t = 1 + static_cast<int>(rng.uniform01() * panel.n_times);
        mask.emplace_back(i + 1, std::min(t, panel.n_times));
    }
    return mask;
}

namespace {

/// R-hat over identifiable functionals: lp is not identifiable; use phi0,
/// phi1, exp(theta1) and a spread of fitted means q_it.
double max_identifiable_rhat(const PanelModel& model, const PosteriorDraws& draws) {
    const ParamLayout& L = model.layout();
    const PanelData& panel = model.panel();
    const long n_rows = draws.n_rows();
    std::vector<double> constrained(L.total);

    // Derived series: columns are functionals, not raw parameters.
    std::vector<std::vector<double>> series; // per functional, length n_rows
    std::vector<std::pair<int, int>> q_cells;
    const int step = std::max(1, panel.n_units * panel.n_times / 48);
    for (int c = 0; c < panel.n_units * panel.n_times; c += step) {
        q_cells.emplace_back(c / panel.n_times, c % panel.n_times + 1);
    }
    const int n_fun = 2 + (L.log_xi1 >= 0 ? 1 : 0) + (L.theta1 >= 0 ? 1 : 0) +
                      static_cast<int>(q_cells.size());
    series.assign(n_fun, std::vector<double>(n_rows));

    for (long d = 0; d < n_rows; ++d) {
        model.constrain(draws.row(d), constrained);
        const ParamsRow row{&L, {constrained.data(), constrained.size()}};
        int f = 0;
        series[f++][d] = draws.lp[d];
        series[f++][d] = row.phi0();
        if (L.log_xi1 >= 0) series[f++][d] = row.phi1();
        if (L.theta1 >= 0) series[f++][d] = std::exp(row.theta1());
        for (const auto& [i, t] : q_cells) {
            const double q0 = mean_untreated(row, panel, i, t);
            series[f++][d] = panel.exposed(i, t)
                                 ? mean_treated(row, panel, model.basis(), model.config(), i, t)
                                 : q0;
        }
    }

    double max_rhat = 0.0;
    for (const auto& fun : series) {
        std::vector<std::vector<double>> chains(draws.n_chains);
        for (long d = 0; d < n_rows; ++d) chains[draws.chain_id[d]].push_back(fun[d]);
        const auto diag = compute_rhat(chains);
        if (!diag.zero_variance) max_rhat = std::max(max_rhat, diag.rhat);
    }
    return max_rhat;
}

} // namespace

CvResult run_cv(const PanelData& panel, const RunConfig& config, const CvOptions& options) {
    panel.validate();
    if (options.h_grid.empty()) throw ValidationError("cv: empty factor grid");
    if (options.n_replicates < 1) throw ValidationError("cv: need at least one replicate");
    RunConfig base = config;
    base.fit_mode = FitMode::Full; // CV always scores the full-model posterior
    base.mcmc = options.mcmc;
    base.resolve_against(panel);

    const int n_exposed_units =
        static_cast<int>(std::count_if(panel.first_exposure.begin(),
                                       panel.first_exposure.end(),
                                       [&](int g) { return g <= panel.n_times; }));
    if (n_exposed_units == 0) throw ValidationError("cv: no exposed units to mask");

    // Masks are shared across h for each replicate.
    std::vector<std::vector<std::pair<int, int>>> masks(options.n_replicates);
    for (int r = 0; r < options.n_replicates; ++r) {
        Rng rng(Rng::derive_seed(options.seed, 0x1000 + static_cast<std::uint64_t>(r)));
        masks[r] = make_cv_mask(panel, rng);
    }

    const long n_jobs = static_cast<long>(options.h_grid.size()) * options.n_replicates;
    std::vector<CvCell> cells(n_jobs);

    parallel_for(n_jobs, options.threads, [&](long job) {
        const int h_idx = static_cast<int>(job) / options.n_replicates;
        const int r = static_cast<int>(job) % options.n_replicates;
        const int h = options.h_grid[h_idx];

        RunConfig cfg = base;
        cfg.n_factors = h;
        cfg.mcmc.seed = Rng::derive_seed(options.seed, 0x2000 + static_cast<std::uint64_t>(job));

        std::vector<std::uint8_t> mask(static_cast<std::size_t>(panel.n_units) * panel.n_times, 0);
        for (const auto& [unit, t] : masks[r]) {
            mask[static_cast<std::size_t>(unit - 1) * panel.n_times + t - 1] = 1;
        }

        const SplineBasis basis = basis_for(panel, cfg);
        const PriorSpec priors = PriorSpec::resolve(cfg.priors, panel);
        PanelModel model(panel, cfg, basis, priors, mask);
        SamplerConfig sampler = SamplerConfig::from(cfg.mcmc, 1);
        const PosteriorDraws draws = run_chains(model, sampler);

        CvCell& cell = cells[job];
        cell.h = h;
        cell.replicate = r;
        cell.max_rhat = max_identifiable_rhat(model, draws);
        cell.converged = cell.max_rhat <= options.rhat_threshold;

        // Posterior-predictive scoring of the masked cells.
        Rng pred_rng(Rng::derive_seed(options.seed, 0x3000 + static_cast<std::uint64_t>(job)));
        std::vector<double> constrained(model.layout().total);
        const long n_rows = draws.n_rows();
        std::vector<std::vector<double>> pred(masks[r].size(),
                                              std::vector<double>(n_rows));
        for (long d = 0; d < n_rows; ++d) {
            model.constrain(draws.row(d), constrained);
            const ParamsRow row{&model.layout(), {constrained.data(), constrained.size()}};
            const double phi0 = row.phi0();
            const double phi1 = row.phi1();
            for (std::size_t c = 0; c < masks[r].size(); ++c) {
                const int i = masks[r][c].first - 1;
                const int t = masks[r][c].second;
                double q, phi;
                if (panel.exposed(i, t)) {
                    q = mean_treated(row, panel, basis, cfg, i, t);
                    phi = phi1;
                } else {
                    q = mean_untreated(row, panel, i, t);
                    phi = phi0;
                }
                pred[c][d] = static_cast<double>(pred_rng.negbin(q, phi));
            }
        }
        double mspe = 0.0, is = 0.0;
        for (std::size_t c = 0; c < masks[r].size(); ++c) {
            const int i = masks[r][c].first - 1;
            const int t = masks[r][c].second;
            const double y = static_cast<double>(panel.y_at(i, t - 1));
            for (long d = 0; d < n_rows; ++d) {
                const double e = y - pred[c][d];
                mspe += e * e;
            }
            std::sort(pred[c].begin(), pred[c].end());
            const double lo = quantile_sorted(pred[c], 0.025);
            const double hi = quantile_sorted(pred[c], 0.975);
            is += interval_score(y, lo, hi, 0.05);
        }
        cell.mspe = mspe;
        cell.is = is;
    });

    CvResult result;
    result.cells = std::move(cells);
    for (std::size_t h_idx = 0; h_idx < options.h_grid.size(); ++h_idx) {
        CvAggregate agg;
        agg.h = options.h_grid[h_idx];
        for (int r = 0; r < options.n_replicates; ++r) {
            const CvCell& cell = result.cells[h_idx * options.n_replicates + r];
            if (!cell.converged) {
                ++agg.n_excluded;
                continue;
            }
            agg.mspe += cell.mspe;
            agg.is += cell.is;
        }
        if (agg.n_excluded == options.n_replicates) {
            agg.mspe = std::numeric_limits<double>::infinity();
            agg.is = std::numeric_limits<double>::infinity();
        }
        result.aggregates.push_back(agg);
    }
    const auto best = std::min_element(
        result.aggregates.begin(), result.aggregates.end(),
        [](const CvAggregate& a, const CvAggregate& b) {
            if (a.mspe != b.mspe) return a.mspe < b.mspe;
            return a.h < b.h;
        });
    result.selected_h = best->h;
    return result;
}

} // namespace bcpanel
