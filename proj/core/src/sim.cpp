#include "bcpanel/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcpanel/copula.hpp"
#include "bcpanel/countdist.hpp"
#include "bcpanel/diagnostics.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/logdensity.hpp"
#include "bcpanel/nuts.hpp"
#include "bcpanel/special.hpp"
#include "bcpanel/spline.hpp"
#include "bcpanel/threading.hpp"

namespace bcpanel {

std::string to_string(SimFitMode mode) {
    return mode == SimFitMode::Full ? "full" : "cut";
}

SimDataset generate_dataset(const SimScenario& sc, std::uint64_t seed) {
    if (sc.n_units < 1 || sc.n_times < 2 || sc.t_min < 1 || sc.t_min > sc.n_times) {
        throw ValidationError("sim: bad scenario dimensions");
    }
    SimDataset ds;
    ds.seed = seed;
    Rng rng(seed);

    SimHypers& hp = ds.hypers;
    hp.lambda0 = rng.uniform(sc.lambda0_lo, sc.lambda0_hi);
    hp.sigma_lambda = rng.uniform(sc.sigma_lambda_lo, sc.sigma_lambda_hi);
    hp.kappa0 = rng.uniform(sc.kappa0_lo, sc.kappa0_hi);
    hp.sigma_kappa = rng.uniform(sc.sigma_kappa_lo, sc.sigma_kappa_hi);
    hp.theta = rng.uniform(sc.theta_lo, sc.theta_hi);
    hp.sigma_psi = rng.uniform(sc.sigma_psi_lo, sc.sigma_psi_hi);
    hp.delta0 = rng.uniform(sc.delta0_lo, sc.delta0_hi);
    hp.delta1 = rng.uniform(sc.delta1_lo, sc.delta1_hi);

    const int N = sc.n_units, T = sc.n_times;
    PanelData& panel = ds.panel;
    panel.n_units = N;
    panel.n_times = T;
    panel.n_covariates = 0;
    panel.y.assign(static_cast<std::size_t>(N) * T, 0);
    panel.a.assign(static_cast<std::size_t>(N) * T, 0);
    for (int i = 0; i < N; ++i) panel.unit_labels.push_back("u" + std::to_string(i + 1));
    for (int t = 1; t <= T; ++t) panel.time_labels.push_back(std::to_string(t));

    ds.kappa.resize(N);
    ds.zeta.resize(N);
    ds.y_untreated.assign(static_cast<std::size_t>(N) * T, 0);
    ds.y_treated.assign(static_cast<std::size_t>(N) * T, 0);

    const double rho = sc.rho_true;
    for (int i = 0; i < N; ++i) {
        ds.kappa[i] = rng.normal(hp.kappa0, hp.sigma_kappa);
        ds.zeta[i] = rng.normal(hp.lambda0, hp.sigma_lambda);

        long a_prev = 0;
        const double recruit_rate = std::exp(hp.delta0 + hp.delta1 * ds.zeta[i]);
        double cum = 0.0;
        for (int t = 1; t <= T; ++t) {
            const std::size_t c = static_cast<std::size_t>(i) * T + t - 1;
            long a_t = a_prev;
            if (t >= sc.t_min) a_t += rng.poisson(recruit_rate);
            panel.a[c] = a_t;
            a_prev = a_t;
            cum += static_cast<double>(a_t);

            const double lp0 = ds.kappa[i] + ds.zeta[i] * static_cast<double>(t);
            const double q0 = std::exp(std::min(lp0, 40.0));
            const double u1 = std::clamp(rng.uniform01(), 1e-12, 1.0 - 1e-12);
            double u0 = u1;
            if (rho >= 1.0) {
                u0 = u1;
            } else if (rho <= -1.0) {
                u0 = 1.0 - u1;
            } else {
                const double z1 = norm_quantile(u1);
                const double z0 = rho * z1 + std::sqrt(1.0 - rho * rho) * rng.normal();
                u0 = std::clamp(norm_cdf(z0), 1e-12, 1.0 - 1e-12);
            }
            const long y0 = poisson_quantile(u0, q0);
            ds.y_untreated[c] = y0;
            if (cum > 0.0) {
                const double psi = rng.normal(hp.theta * std::log(cum), hp.sigma_psi);
                const double q1 = std::exp(std::min(lp0 + psi, 40.0));
                const long y1 = poisson_quantile(u1, q1);
                ds.y_treated[c] = y1;
                panel.y[c] = y1;
                ds.tau_true += y1 - y0;
            } else {
                ds.y_treated[c] = y0;
                panel.y[c] = y0;
            }
        }
    }
    panel.derive_first_exposure();
    return ds;
}

namespace {

struct Interval {
    double lo, hi;
    double transform(double u) const { // logit^{-1} scaled to [lo, hi]
        const double s = 1.0 / (1.0 + std::exp(-u));
        return lo + (hi - lo) * s;
    }
};

/// Hierarchical Poisson model matched to the DGM, non-centered:
///   kappa_i = kappa0 + sigma_kappa * k_raw_i
///   zeta_i  = lambda0 + sigma_lambda * z_raw_i
///   psi_c   = theta * log(cum_a_c) + sigma_psi * p_raw_c
/// with the eight hyperparameters logit-transformed onto their generating
/// uniform ranges. Cut mode drops the recruitment likelihood and the two
/// delta parameters.
class SimModel : public LogDensityModel {
public:
    SimModel(const SimDataset& ds, const SimScenario& sc, SimFitMode mode)
        : panel_(&ds.panel), t_min_(sc.t_min), full_(mode == SimFitMode::Full) {
        const PanelData& p = *panel_;
        n_units_ = p.n_units;
        n_times_ = p.n_times;
        for (int i = 0; i < n_units_; ++i) {
            double cum = 0.0;
            for (int t = 1; t <= n_times_; ++t) {
                cum += static_cast<double>(p.a_at(i, t - 1));
                if (cum > 0.0) {
                    cells_.push_back({i, t, std::log(cum)});
                }
            }
        }
        if (cells_.empty()) {
            throw ValidationError("sim fit: dataset has no exposed cells");
        }
        ranges_ = {Interval{sc.kappa0_lo, sc.kappa0_hi},
                   Interval{sc.sigma_kappa_lo, sc.sigma_kappa_hi},
                   Interval{sc.lambda0_lo, sc.lambda0_hi},
                   Interval{sc.sigma_lambda_lo, sc.sigma_lambda_hi},
                   Interval{sc.theta_lo, sc.theta_hi},
                   Interval{sc.sigma_psi_lo, sc.sigma_psi_hi},
                   Interval{sc.delta0_lo, sc.delta0_hi},
                   Interval{sc.delta1_lo, sc.delta1_hi}};
        n_hypers_ = full_ ? 8 : 6;

        lgamma_y_.resize(static_cast<std::size_t>(n_units_) * n_times_);
        increments_.resize(lgamma_y_.size());
        lgamma_m_.resize(lgamma_y_.size());
        cell_index_.assign(lgamma_y_.size(), -1);
        for (int i = 0; i < n_units_; ++i) {
            for (int t = 1; t <= n_times_; ++t) {
                const std::size_t c = static_cast<std::size_t>(i) * n_times_ + t - 1;
                lgamma_y_[c] = std::lgamma(static_cast<double>(p.y_at(i, t - 1)) + 1.0);
                increments_[c] = p.increments(i, t);
                lgamma_m_[c] = std::lgamma(static_cast<double>(increments_[c]) + 1.0);
            }
        }
        for (std::size_t e = 0; e < cells_.size(); ++e) {
            cell_index_[static_cast<std::size_t>(cells_[e].unit) * n_times_ +
                        cells_[e].time - 1] = static_cast<long>(e);
        }
    }

    struct ExposedCell {
        int unit;
        int time; // 1-based
        double log_cum;
    };

    int dim() const override {
        return 2 * n_units_ + static_cast<int>(cells_.size()) + n_hypers_;
    }

    int k_raw_offset() const { return 0; }
    int z_raw_offset() const { return n_units_; }
    int p_raw_offset() const { return 2 * n_units_; }
    int hyper_offset() const { return 2 * n_units_ + static_cast<int>(cells_.size()); }
    const std::vector<ExposedCell>& exposed_cells() const { return cells_; }

    struct Hypers {
        double kappa0, sigma_kappa, lambda0, sigma_lambda, theta, sigma_psi;
        double delta0 = 0.0, delta1 = 0.0;
    };

    Hypers hypers_at(std::span<const double> x) const {
        const int off = hyper_offset();
        Hypers h;
        h.kappa0 = ranges_[0].transform(x[off + 0]);
        h.sigma_kappa = ranges_[1].transform(x[off + 1]);
        h.lambda0 = ranges_[2].transform(x[off + 2]);
        h.sigma_lambda = ranges_[3].transform(x[off + 3]);
        h.theta = ranges_[4].transform(x[off + 4]);
        h.sigma_psi = ranges_[5].transform(x[off + 5]);
        if (full_) {
            h.delta0 = ranges_[6].transform(x[off + 6]);
            h.delta1 = ranges_[7].transform(x[off + 7]);
        }
        return h;
    }

    double kappa_at(std::span<const double> x, const Hypers& h, int i) const {
        return h.kappa0 + h.sigma_kappa * x[k_raw_offset() + i];
    }
    double zeta_at(std::span<const double> x, const Hypers& h, int i) const {
        return h.lambda0 + h.sigma_lambda * x[z_raw_offset() + i];
    }
    double psi_at(std::span<const double> x, const Hypers& h, std::size_t e) const {
        return h.theta * cells_[e].log_cum + h.sigma_psi * x[p_raw_offset() + e];
    }

    double log_density(std::span<const double> x, std::span<double> grad) const override;
    void initial_point(Rng& rng, std::span<double> out) const override;

private:
    const PanelData* panel_;
    int t_min_;
    bool full_;
    int n_units_ = 0, n_times_ = 0, n_hypers_ = 0;
    std::vector<ExposedCell> cells_;
    std::vector<Interval> ranges_;
    std::vector<double> lgamma_y_, lgamma_m_;
    std::vector<long> increments_;
    std::vector<long> cell_index_;
};

double SimModel::log_density(std::span<const double> x, std::span<double> grad) const {
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    constexpr double kCap = 40.0;
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    const int off = hyper_offset();
    const Hypers h = hypers_at(x);

    double value = 0.0;
    // Hyper logit Jacobians: log(hi-lo) + log s + log(1-s); uniform density
    // contributes -log(hi-lo), so the two range terms cancel.
    for (int j = 0; j < n_hypers_; ++j) {
        const double u = x[off + j];
        const double s = 1.0 / (1.0 + std::exp(-u));
        value += std::log(s) + std::log1p(-s);
        if (want_grad) grad[off + j] += 1.0 - 2.0 * s;
    }

    // Standard-normal priors on the raw coordinates.
    const int n_raw = 2 * n_units_ + static_cast<int>(cells_.size());
    for (int j = 0; j < n_raw; ++j) {
        value -= 0.5 * x[j] * x[j];
        if (want_grad) grad[j] -= x[j];
    }

    double d_kappa0 = 0.0, d_sigma_kappa = 0.0, d_lambda0 = 0.0, d_sigma_lambda = 0.0;
    double d_theta = 0.0, d_sigma_psi = 0.0, d_delta0 = 0.0, d_delta1 = 0.0;

    for (int i = 0; i < n_units_; ++i) {
        const double kappa_i = kappa_at(x, h, i);
        const double zeta_i = zeta_at(x, h, i);
        double gk = 0.0, gz = 0.0;
        for (int t = 1; t <= n_times_; ++t) {
            const std::size_t c = static_cast<std::size_t>(i) * n_times_ + t - 1;
            double lp = kappa_i + zeta_i * static_cast<double>(t);
            const long e = cell_index_[c];
            if (e >= 0) lp += psi_at(x, h, static_cast<std::size_t>(e));
            if (lp > kCap || lp < -kCap) return kNegInf;
            const double mu = std::exp(lp);
            const double yd = static_cast<double>(panel_->y_at(i, t - 1));
            value += yd * lp - mu - lgamma_y_[c];
            if (want_grad) {
                const double g = yd - mu;
                gk += g;
                gz += g * static_cast<double>(t);
                if (e >= 0) {
                    grad[p_raw_offset() + e] += g * h.sigma_psi;
                    d_theta += g * cells_[e].log_cum;
                    d_sigma_psi += g * x[p_raw_offset() + e];
                }
            }
        }
        if (full_) {
            const double lm = h.delta0 + h.delta1 * zeta_i;
            if (lm > kCap || lm < -kCap) return kNegInf;
            const double mu_m = std::exp(lm);
            for (int t = t_min_; t <= n_times_; ++t) {
                const std::size_t c = static_cast<std::size_t>(i) * n_times_ + t - 1;
                const double md = static_cast<double>(increments_[c]);
                value += md * lm - mu_m - lgamma_m_[c];
                if (want_grad) {
                    const double gm = md - mu_m;
                    d_delta0 += gm;
                    d_delta1 += gm * zeta_i;
                    gz += gm * h.delta1;
                }
            }
        }
        if (want_grad) {
            grad[k_raw_offset() + i] += gk * h.sigma_kappa;
            grad[z_raw_offset() + i] += gz * h.sigma_lambda;
            d_kappa0 += gk;
            d_sigma_kappa += gk * x[k_raw_offset() + i];
            d_lambda0 += gz;
            d_sigma_lambda += gz * x[z_raw_offset() + i];
        }
    }

    if (want_grad) {
        const double d_hyper[8] = {d_kappa0, d_sigma_kappa, d_lambda0, d_sigma_lambda,
                                   d_theta, d_sigma_psi, d_delta0, d_delta1};
        for (int j = 0; j < n_hypers_; ++j) {
            const double u = x[off + j];
            const double s = 1.0 / (1.0 + std::exp(-u));
            grad[off + j] += d_hyper[j] * (ranges_[j].hi - ranges_[j].lo) * s * (1.0 - s);
        }
    }
    return std::isfinite(value) ? value : kNegInf;
}

void SimModel::initial_point(Rng& rng, std::span<double> out) const {
    for (auto& v : out) v = 0.3 * rng.uniform(-1.0, 1.0);
}

std::vector<double> tau_draws_for(const SimModel& model, const SimDataset& ds,
                                  const PosteriorDraws& draws, double rho,
                                  std::uint64_t seed) {
    const auto& cells = model.exposed_cells();
    std::vector<double> taus(draws.n_rows());
    for (long d = 0; d < draws.n_rows(); ++d) {
        Rng rng(Rng::derive_seed(seed, static_cast<std::uint64_t>(d)));
        const auto x = draws.row(d);
        const auto h = model.hypers_at(x);
        double tau = 0.0;
        for (std::size_t e = 0; e < cells.size(); ++e) {
            const int i = cells[e].unit;
            const int t = cells[e].time;
            const double lp0 = model.kappa_at(x, h, i) +
                               model.zeta_at(x, h, i) * static_cast<double>(t);
            const double q0 = std::exp(std::min(lp0, 40.0));
            const double q1 = std::exp(std::min(lp0 + model.psi_at(x, h, e), 40.0));
            const long y_obs = ds.panel.y_at(i, t - 1);
            const long y0 = copula_impute_poisson(y_obs, q1, q0, rho, rng);
            tau += static_cast<double>(y_obs - y0);
        }
        taus[d] = tau;
    }
    return taus;
}

} // namespace

int sim_fit_dim(const SimDataset& ds, const SimScenario& sc, SimFitMode mode) {
    return SimModel(ds, sc, mode).dim();
}

double sim_fit_log_density(const SimDataset& ds, const SimScenario& sc, SimFitMode mode,
                           std::span<const double> x, std::span<double> grad) {
    return SimModel(ds, sc, mode).log_density(x, grad);
}

SimFitResult fit_sim(const SimDataset& ds, SimFitMode mode, const SimScenario& sc,
                     std::uint64_t seed) {
    SimModel model(ds, sc, mode);
    SamplerConfig cfg = SamplerConfig::from(sc.mcmc, 1);
    cfg.seed = seed;
    const PosteriorDraws draws = run_chains(model, cfg);

    const auto taus = tau_draws_for(model, ds, draws, sc.rho_true,
                                    Rng::derive_seed(seed, 0xC0DA));
    SimFitResult result;
    std::vector<double> sorted = taus;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : taus) sum += v;
    result.tau_hat = sum / static_cast<double>(taus.size());
    result.ci_lo = quantile_sorted(sorted, 0.025);
    result.ci_hi = quantile_sorted(sorted, 0.975);
    result.divergences = draws.total_divergent();

    if (draws.n_chains >= 2 && draws.per_chain >= 4) {
        std::vector<std::vector<double>> chains(draws.n_chains);
        for (long d = 0; d < draws.n_rows(); ++d) {
            chains[draws.chain_id[d]].push_back(taus[d]);
        }
        const auto diag = compute_rhat(chains);
        result.rhat_tau = diag.rhat;
        result.converged = diag.zero_variance || diag.rhat <= 1.05;
    }
    // A heavily divergent run is unreliable regardless of R-hat.
    if (draws.divergence_rate() > 0.05) result.converged = false;
    return result;
}

SimReport run_study(const SimScenario& scenario, const std::vector<SimFitMode>& modes,
                    std::uint64_t master_seed, int threads) {
    if (scenario.n_datasets < 1) throw ValidationError("sim: need at least one dataset");
    if (modes.empty()) throw ValidationError("sim: no fit modes requested");

    const long n = scenario.n_datasets;
    std::vector<std::vector<SimRow>> rows(n);
    std::vector<SimHypers> hyperdraws(n);
    parallel_for(n, threads, [&](long idx) {
        const std::uint64_t ds_seed =
            Rng::derive_seed(master_seed, 0xD5000000ULL + static_cast<std::uint64_t>(idx));
        const SimDataset ds = generate_dataset(scenario, ds_seed);
        hyperdraws[idx] = ds.hypers;
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const std::uint64_t fit_seed =
                Rng::derive_seed(ds_seed, 0xF17000ULL + static_cast<std::uint64_t>(m));
            const SimFitResult fit = fit_sim(ds, modes[m], scenario, fit_seed);
            SimRow row;
            row.dataset = static_cast<int>(idx);
            row.mode = modes[m];
            row.seed = ds_seed;
            row.tau_true = ds.tau_true;
            row.tau_hat = fit.tau_hat;
            row.ci_lo = fit.ci_lo;
            row.ci_hi = fit.ci_hi;
            row.error = static_cast<double>(ds.tau_true) - fit.tau_hat;
            row.width = fit.ci_hi - fit.ci_lo;
            row.covered = static_cast<double>(ds.tau_true) >= fit.ci_lo &&
                          static_cast<double>(ds.tau_true) <= fit.ci_hi;
            row.converged = fit.converged;
            rows[idx].push_back(row);
        }
    });

    SimReport report;
    report.hyperdraws = std::move(hyperdraws);
    for (long idx = 0; idx < n; ++idx) {
        for (const auto& row : rows[idx]) report.rows.push_back(row);
    }
    for (const auto mode : modes) {
        SimAggregate agg;
        agg.mode = mode;
        double sum_err = 0.0, sum_width = 0.0;
        long n_cov = 0;
        std::vector<double> errors;
        for (const auto& row : report.rows) {
            if (row.mode != mode) continue;
            if (!row.converged) {
                ++agg.n_excluded;
                continue;
            }
            ++agg.n_used;
            sum_err += row.error;
            sum_width += row.width;
            if (row.covered) ++n_cov;
            errors.push_back(row.error);
        }
        if (agg.n_used > 0) {
            const double nn = static_cast<double>(agg.n_used);
            agg.mean_error = sum_err / nn;
            agg.mean_width = sum_width / nn;
            agg.coverage = static_cast<double>(n_cov) / nn;
            double ss = 0.0;
            for (double e : errors) ss += (e - agg.mean_error) * (e - agg.mean_error);
            agg.error_mc_se = agg.n_used > 1 ? std::sqrt(ss / (nn - 1.0) / nn) : 0.0;
            agg.coverage_se = std::sqrt(agg.coverage * (1.0 - agg.coverage) / nn);
        }
        report.aggregates.push_back(agg);
    }
    return report;
}

} // namespace bcpanel
