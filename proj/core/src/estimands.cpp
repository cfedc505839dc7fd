#include "bcpanel/estimands.hpp"

#include <algorithm>
#include <cmath>

#include "bcpanel/errors.hpp"
#include "bcpanel/spline.hpp"

namespace bcpanel {

EstimandSummary summarize(const std::string& name, std::span<const double> draws,
                          double positivity_reference) {
    if (draws.empty()) throw ValidationError("summarize: empty draw stream");
    EstimandSummary s;
    s.name = name;
    s.n_draws = static_cast<long>(draws.size());
    std::vector<double> sorted(draws.begin(), draws.end());
    for (double v : sorted) {
        if (!std::isfinite(v)) throw ValidationError("summarize: non-finite draw in " + name);
    }
    // Accumulate in sorted order so summaries do not depend on draw order.
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    long n_pos = 0;
    for (double v : sorted) {
        sum += v;
        if (v > positivity_reference) ++n_pos;
    }
    s.mean = sum / static_cast<double>(sorted.size());
    s.cri_lo = quantile_sorted(sorted, 0.025);
    s.cri_hi = quantile_sorted(sorted, 0.975);
    s.p_positive = static_cast<double>(n_pos) / static_cast<double>(sorted.size());
    return s;
}

std::vector<double> ite_draws(long y_obs, std::span<const long> y0_draws) {
    std::vector<double> out;
    out.reserve(y0_draws.size());
    for (long y0 : y0_draws) {
        out.push_back(static_cast<double>(y_obs - y0));
    }
    return out;
}

CumulativeEffects cumulative_effects(const PanelData& panel,
                                     const CounterfactualDraws& cf, int window_start,
                                     int window_end) {
    if (window_start < 1 || window_end > panel.n_times || window_start > window_end) {
        throw ValidationError("estimand window outside the panel");
    }
    CumulativeEffects out;
    const std::size_t n_cells = cf.cells.size();
    out.tau.assign(cf.n_draws, 0.0);
    out.tau_c.assign(cf.n_draws, 0.0);
    for (long d = 0; d < cf.n_draws; ++d) {
        double tau = 0.0, tau_c = 0.0;
        for (std::size_t c = 0; c < n_cells; ++c) {
            const int i = cf.cells[c].first - 1;
            const int t = cf.cells[c].second;
            const double ite =
                static_cast<double>(panel.y_at(i, t - 1) - cf.y0_at(d, c));
            tau += ite;
            if (t >= window_start && t <= window_end) tau_c += ite;
        }
        out.tau[d] = tau;
        out.tau_c[d] = tau_c;
    }
    out.share.reserve(cf.n_draws);
    for (long d = 0; d < cf.n_draws; ++d) {
        if (out.tau[d] == 0.0) {
            ++out.n_ratio_excluded;
        } else {
            out.share.push_back(out.tau_c[d] / out.tau[d]);
        }
    }
    return out;
}

PercentIncrease percent_increase(const PanelData& panel, const CounterfactualDraws& cf) {
    PercentIncrease out;
    out.chi.reserve(cf.n_draws);
    const std::size_t n_cells = cf.cells.size();
    for (long d = 0; d < cf.n_draws; ++d) {
        double num = 0.0, den = 0.0;
        for (std::size_t c = 0; c < n_cells; ++c) {
            const int i = cf.cells[c].first - 1;
            const int t = cf.cells[c].second;
            const double y0 = static_cast<double>(cf.y0_at(d, c));
            num += static_cast<double>(panel.y_at(i, t - 1)) - y0;
            den += y0;
        }
        if (den == 0.0) {
            ++out.n_excluded;
        } else {
            out.chi.push_back(100.0 * num / den);
        }
    }
    return out;
}

double rate_ratio(const ParamsRow& params, const SplineBasis& basis, double cum_a,
                  bool in_lockdown, const double* x) {
    double psi = basis.value(cum_a, {&params.row[params.layout->w],
                                     static_cast<std::size_t>(params.layout->n_basis)});
    if (in_lockdown) psi += params.theta1();
    if (x != nullptr) {
        for (int k = 0; k < params.layout->n_covariates; ++k) {
            psi += params.theta_x(k) * x[k];
        }
    }
    return std::exp(psi);
}

namespace {

std::vector<ParamsRow> rows_of(const std::vector<double>& flat, const ParamLayout& L) {
    if (L.total == 0 || flat.size() % L.total != 0) {
        throw ValidationError("draw matrix does not match the parameter layout");
    }
    std::vector<ParamsRow> rows(flat.size() / L.total);
    for (std::size_t d = 0; d < rows.size(); ++d) {
        rows[d] = ParamsRow{&L, {flat.data() + d * L.total, static_cast<std::size_t>(L.total)}};
    }
    return rows;
}

} // namespace

std::vector<double> mixed_average_effect(const std::vector<double>& constrained_rows,
                                         const ParamLayout& layout,
                                         const PanelData& panel,
                                         const SplineBasis& basis,
                                         const RunConfig& config) {
    if (!layout.has_treatment_block()) {
        throw ValidationError("mixed average effect needs a fit with treatment terms");
    }
    const auto cells = panel.exposed_cells();
    if (cells.empty()) throw ValidationError("no exposed cells");
    const auto rows = rows_of(constrained_rows, layout);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        double sum = 0.0;
        for (const auto& [unit, t] : cells) {
            const int i = unit - 1;
            sum += rate_ratio(row, basis, panel.cum_exposure(i, t), config.in_lockdown(t),
                              panel.x_row(i, t - 1));
        }
        out.push_back(sum / static_cast<double>(cells.size()));
    }
    return out;
}

std::vector<OmegaGridRow> omega_grid(const std::vector<double>& constrained_rows,
                                     const ParamLayout& layout, const PanelData& panel,
                                     const SplineBasis& basis, const RunConfig& config) {
    if (!layout.has_treatment_block()) {
        throw ValidationError("omega grid needs a fit with treatment terms");
    }
    (void)config;
    long max_cum = 0;
    for (int i = 0; i < panel.n_units; ++i) {
        max_cum = std::max(max_cum,
                           static_cast<long>(panel.cum_exposure(i, panel.n_times)));
    }
    const auto rows = rows_of(constrained_rows, layout);
    std::vector<OmegaGridRow> grid;
    std::vector<double> draws(rows.size());
    for (int lockdown = 0; lockdown <= 1; ++lockdown) {
        for (long c = 0; c <= max_cum; ++c) {
            for (std::size_t d = 0; d < rows.size(); ++d) {
                draws[d] = rate_ratio(rows[d], basis, static_cast<double>(c),
                                      lockdown != 0);
            }
            OmegaGridRow row;
            row.cum_a = static_cast<double>(c);
            row.lockdown = lockdown != 0;
            row.summary = summarize("omega", draws, 1.0);
            grid.push_back(std::move(row));
        }
    }
    return grid;
}

EstimandReport estimand_report(const std::vector<double>& constrained_rows,
                               const ParamLayout& layout, const PanelData& panel,
                               const SplineBasis& basis, const RunConfig& config,
                               const CounterfactualDraws& cf) {
    if (cf.cells.empty()) throw ValidationError("no exposed cells");
    EstimandReport report;

    const auto effects = cumulative_effects(panel, cf, config.lockdown_start,
                                            config.lockdown_end);
    report.scalars.push_back(summarize("tau", effects.tau, 0.0));
    report.scalars.push_back(summarize("tau_lockdown", effects.tau_c, 0.0));
    if (!effects.share.empty()) {
        auto share = summarize("lockdown_share", effects.share, 0.0);
        share.n_excluded = effects.n_ratio_excluded;
        report.scalars.push_back(std::move(share));
    }
    const auto pct = percent_increase(panel, cf);
    if (!pct.chi.empty()) {
        auto chi = summarize("chi_percent", pct.chi, 0.0);
        chi.n_excluded = pct.n_excluded;
        report.scalars.push_back(std::move(chi));
    }

    const auto rows = rows_of(constrained_rows, layout);
    if (static_cast<long>(rows.size()) != cf.n_draws) {
        throw ValidationError("parameter draws and counterfactual draws disagree");
    }
    std::vector<double> phi0(rows.size()), scratch(rows.size());
    for (std::size_t d = 0; d < rows.size(); ++d) phi0[d] = rows[d].phi0();
    report.scalars.push_back(summarize("phi0", phi0, 0.0));
    if (layout.log_xi1 >= 0) {
        std::vector<double> phi1(rows.size()), indicator(rows.size());
        for (std::size_t d = 0; d < rows.size(); ++d) {
            phi1[d] = rows[d].phi1();
            indicator[d] = rows[d].phi1() < rows[d].phi0() ? 1.0 : 0.0;
        }
        report.scalars.push_back(summarize("phi1", phi1, 0.0));
        report.scalars.push_back(summarize("p_phi1_lt_phi0", indicator, 0.0));
    }
    if (layout.has_treatment_block()) {
        for (std::size_t d = 0; d < rows.size(); ++d) {
            scratch[d] = std::exp(rows[d].theta1());
        }
        report.scalars.push_back(summarize("exp_theta1", scratch, 1.0));
        report.scalars.push_back(summarize(
            "tau_m", mixed_average_effect(constrained_rows, layout, panel, basis, config),
            1.0));
    }

    // Per-cell ITE summaries.
    std::vector<long> y0_col(cf.n_draws);
    for (std::size_t c = 0; c < cf.cells.size(); ++c) {
        const int i = cf.cells[c].first - 1;
        const int t = cf.cells[c].second;
        for (long d = 0; d < cf.n_draws; ++d) y0_col[d] = cf.y0_at(d, c);
        const auto ites = ite_draws(panel.y_at(i, t - 1), y0_col);
        report.ite.emplace_back(cf.cells[c], summarize("ite", ites, 0.0));
    }
    return report;
}

} // namespace bcpanel
