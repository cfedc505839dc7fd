#include "bcpanel/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcpanel/countdist.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/special.hpp"

namespace bcpanel {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
} // namespace

double calibrate_dispersion_prior(double mean_counts) {
    if (!(mean_counts > 0.0)) {
        throw ValidationError("dispersion prior calibration needs a positive mean count");
    }
    return std::sqrt(2.0 / mean_counts) / norm_quantile(0.975);
}

PriorSpec PriorSpec::resolve(const PriorConfig& config, const PanelData& panel) {
    PriorSpec spec;
    const double m2 = config.sd_multiplier * config.sd_multiplier;
    spec.kappa_var = config.kappa_var * m2;
    spec.scalar_var = config.scalar_var * m2;
    spec.vector_var = config.vector_var * m2;

    double sum0 = 0.0, sum1 = 0.0;
    long n0 = 0, n1 = 0;
    for (int i = 0; i < panel.n_units; ++i) {
        for (int t = 1; t <= panel.n_times; ++t) {
            if (panel.a_at(i, t - 1) > 0) {
                sum1 += static_cast<double>(panel.y_at(i, t - 1));
                ++n1;
            } else {
                sum0 += static_cast<double>(panel.y_at(i, t - 1));
                ++n0;
            }
        }
    }
    if (config.sigma0 > 0.0) {
        spec.sigma0 = config.sigma0;
    } else {
        if (n0 == 0) throw ValidationError("no unexposed cells to calibrate sigma0");
        spec.sigma0 = calibrate_dispersion_prior(sum0 / static_cast<double>(n0));
    }
    if (config.sigma1 > 0.0) {
        spec.sigma1 = config.sigma1;
    } else if (n1 > 0) {
        spec.sigma1 = calibrate_dispersion_prior(sum1 / static_cast<double>(n1));
    } else {
        spec.sigma1 = spec.sigma0; // no exposed cells; phi1 is prior-only
    }
    return spec;
}

ParamLayout ParamLayout::create(int n_units, int n_times, int n_factors,
                                int n_covariates, int n_basis, FitMode mode) {
    ParamLayout L;
    L.n_units = n_units;
    L.n_times = n_times;
    L.n_factors = n_factors;
    L.n_covariates = n_covariates;
    L.n_basis = n_basis;
    L.mode = mode;

    int at = 0;
    const auto block = [&at](int& offset, int size) {
        offset = size > 0 ? at : -1;
        at += size;
    };
    block(L.kappa, n_units);
    block(L.beta, n_times);
    block(L.lambda, n_units * n_factors);
    block(L.v, n_times * n_factors);
    block(L.eta, n_covariates);
    block(L.log_xi0, 1);
    if (mode != FitMode::PreIntervention) {
        block(L.w, n_basis);
        block(L.theta1, 1);
        block(L.theta_x, n_covariates);
        block(L.log_xi1, 1);
    }
    if (mode == FitMode::Full) {
        block(L.delta0, 1);
        block(L.delta1, 1);
        block(L.delta_lambda, n_factors);
        block(L.delta_x, n_covariates);
    }
    L.total = at;
    return L;
}

std::vector<std::string> ParamLayout::constrained_names() const {
    std::vector<std::string> names(total);
    const auto scalar = [&](int offset, const std::string& name) {
        if (offset >= 0) names[offset] = name;
    };
    const auto vec = [&](int offset, const std::string& name, int n) {
        for (int j = 0; j < n && offset >= 0; ++j) {
            names[offset + j] = name + "[" + std::to_string(j + 1) + "]";
        }
    };
    const auto mat = [&](int offset, const std::string& name, int rows, int cols) {
        if (offset < 0) return;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                names[offset + r * cols + c] = name + "[" + std::to_string(r + 1) +
                                               "." + std::to_string(c + 1) + "]";
            }
        }
    };
    vec(kappa, "kappa", n_units);
    vec(beta, "beta", n_times);
    mat(lambda, "lambda", n_units, n_factors);
    mat(v, "v", n_times, n_factors);
    vec(eta, "eta", n_covariates);
    scalar(log_xi0, "phi0");
    vec(w, "w", n_basis);
    scalar(theta1, "theta1");
    vec(theta_x, "theta_x", n_covariates);
    scalar(log_xi1, "phi1");
    scalar(delta0, "delta0");
    scalar(delta1, "delta1");
    vec(delta_lambda, "delta_lambda", n_factors);
    vec(delta_x, "delta_x", n_covariates);
    return names;
}

int ParamLayout::index_of(const std::string& constrained_name) const {
    const auto names = constrained_names();
    for (int i = 0; i < total; ++i) {
        if (names[i] == constrained_name) return i;
    }
    return -1;
}

namespace {

double clamp_lp(double lp) {
    return std::clamp(lp, -kLinearPredictorCap, kLinearPredictorCap);
}

double lp_untreated(const ParamsRow& p, const PanelData& panel, int i, int t0) {
    double lp = p.kappa(i) + p.beta(t0);
    for (int f = 0; f < p.layout->n_factors; ++f) lp += p.lambda(i, f) * p.v(t0, f);
    for (int k = 0; k < panel.n_covariates; ++k) lp += p.eta(k) * panel.x_at(i, t0, k);
    return lp;
}

} // namespace

double mean_untreated(const ParamsRow& params, const PanelData& panel, int i, int t) {
    return std::exp(clamp_lp(lp_untreated(params, panel, i, t - 1)));
}

double treatment_term(const ParamsRow& params, const SplineBasis& basis,
                      double cum_a, bool in_lockdown, const double* x_it) {
    std::vector<double> cols(basis.n_basis());
    basis.eval(cum_a, cols);
    double psi = 0.0;
    for (int b = 0; b < basis.n_basis(); ++b) psi += params.w(b) * cols[b];
    if (in_lockdown) psi += params.theta1();
    for (int k = 0; k < params.layout->n_covariates; ++k) psi += params.theta_x(k) * x_it[k];
    return psi;
}

double mean_treated(const ParamsRow& params, const PanelData& panel,
                    const SplineBasis& basis, const RunConfig& config, int i, int t) {
    const double lp = lp_untreated(params, panel, i, t - 1) +
                      treatment_term(params, basis, panel.cum_exposure(i, t),
                                     config.in_lockdown(t), panel.x_row(i, t - 1));
    return std::exp(clamp_lp(lp));
}

double negbin_loglik(long y, double q, double phi) {
    return negbin_logpmf(y, q, phi);
}

PanelModel::PanelModel(const PanelData& panel, const RunConfig& config,
                       const SplineBasis& basis, const PriorSpec& priors,
                       std::vector<std::uint8_t> outcome_mask)
    : panel_(panel), config_(config), basis_(basis), priors_(priors),
      mask_(std::move(outcome_mask)) {
    panel_.validate();
    config_.resolve_against(panel_);
    const std::size_t cells = static_cast<std::size_t>(panel_.n_units) * panel_.n_times;
    if (!mask_.empty() && mask_.size() != cells) {
        throw ValidationError("outcome mask does not match N x T");
    }
    layout_ = ParamLayout::create(panel_.n_units, panel_.n_times, config_.n_factors,
                                  panel_.n_covariates, basis_.n_basis(), config_.fit_mode);

    cum_a_.resize(cells);
    lgamma_y_.resize(cells);
    basis_cols_.assign(cells * basis_.n_basis(), 0.0);
    increments_.assign(cells, 0);
    lgamma_m_.assign(cells, 0.0);
    lockdown_t_.resize(panel_.n_times);
    for (int t = 1; t <= panel_.n_times; ++t) {
        lockdown_t_[t - 1] = config_.in_lockdown(t) ? 1 : 0;
    }
    for (int i = 0; i < panel_.n_units; ++i) {
        double cum = 0.0;
        for (int t = 1; t <= panel_.n_times; ++t) {
            const std::size_t c = static_cast<std::size_t>(i) * panel_.n_times + t - 1;
            cum += static_cast<double>(panel_.a_at(i, t - 1));
            cum_a_[c] = cum;
            lgamma_y_[c] = std::lgamma(static_cast<double>(panel_.y_at(i, t - 1)) + 1.0);
            if (panel_.exposed(i, t)) {
                basis_.eval(cum, std::span<double>(&basis_cols_[c * basis_.n_basis()],
                                                   basis_.n_basis()));
            }
            const long m = panel_.increments(i, t);
            increments_[c] = m;
            lgamma_m_[c] = std::lgamma(static_cast<double>(m) + 1.0);
        }
    }

    // Gaussian normalizing constants and the half-normal ones, fixed per fit.
    double n_gauss = 0.0;
    double log_var_sum = 0.0;
    const auto add = [&](int offset, int n, double var) {
        if (offset < 0) return;
        n_gauss += n;
        log_var_sum += n * std::log(var);
    };
    add(layout_.kappa, layout_.n_units, priors_.kappa_var);
    add(layout_.beta, layout_.n_times, priors_.scalar_var);
    add(layout_.lambda, layout_.n_units * layout_.n_factors, priors_.vector_var);
    add(layout_.v, layout_.n_times * layout_.n_factors, priors_.vector_var);
    add(layout_.eta, layout_.n_covariates, priors_.vector_var);
    add(layout_.w, layout_.n_basis, priors_.vector_var);
    add(layout_.theta1, layout_.theta1 >= 0 ? 1 : 0, priors_.scalar_var);
    add(layout_.theta_x, layout_.n_covariates, priors_.vector_var);
    add(layout_.delta0, layout_.delta0 >= 0 ? 1 : 0, priors_.scalar_var);
    add(layout_.delta1, layout_.delta1 >= 0 ? 1 : 0, priors_.scalar_var);
    add(layout_.delta_lambda, layout_.delta_lambda >= 0 ? layout_.n_factors : 0,
        priors_.vector_var);
    add(layout_.delta_x, layout_.delta_x >= 0 ? layout_.n_covariates : 0,
        priors_.vector_var);
    prior_const_ = -0.5 * n_gauss * kLog2Pi - 0.5 * log_var_sum;
    // Half-normal(0, sigma^2) on xi: log 2 - log sigma - 0.5 log(2 pi).
    prior_const_ += std::log(2.0) - std::log(priors_.sigma0) - 0.5 * kLog2Pi;
    if (layout_.log_xi1 >= 0) {
        prior_const_ += std::log(2.0) - std::log(priors_.sigma1) - 0.5 * kLog2Pi;
    }
}

double PanelModel::outcome_block(std::span<const double> x, std::span<double> grad,
                                 bool& rejected) const {
    const ParamLayout& L = layout_;
    const int h = L.n_factors;
    const int K = L.n_covariates;
    const int B = L.n_basis;
    const bool want_grad = !grad.empty();
    const bool pre_mode = L.mode == FitMode::PreIntervention;

    const double xi0 = std::exp(x[L.log_xi0]);
    const double phi0 = 1.0 / (xi0 * xi0);
    double phi1 = 0.0;
    if (L.log_xi1 >= 0) {
        const double xi1 = std::exp(x[L.log_xi1]);
        phi1 = 1.0 / (xi1 * xi1);
    }
    if (!std::isfinite(phi0) || phi0 <= 0.0 || (L.log_xi1 >= 0 && (!std::isfinite(phi1) || phi1 <= 0.0))) {
        rejected = true;
        return kNegInf;
    }

    double value = 0.0;
    double dphi0 = 0.0, dphi1 = 0.0;

    for (int i = 0; i < panel_.n_units; ++i) {
        const double kappa_i = x[L.kappa + i];
        const double* lambda_i = h > 0 ? &x[L.lambda + i * h] : nullptr;
        for (int t0 = 0; t0 < panel_.n_times; ++t0) {
            const std::size_t c = static_cast<std::size_t>(i) * panel_.n_times + t0;
            if (!mask_.empty() && mask_[c]) continue;
            const bool treated = panel_.exposed(i, t0 + 1);
            if (pre_mode && treated) continue;

            double lp = kappa_i + x[L.beta + t0];
            for (int f = 0; f < h; ++f) lp += lambda_i[f] * x[L.v + t0 * h + f];
            for (int k = 0; k < K; ++k) lp += x[L.eta + k] * panel_.x_at(i, t0, k);
            const double* bc = nullptr;
            if (treated) {
                bc = &basis_cols_[c * B];
                for (int b = 0; b < B; ++b) lp += x[L.w + b] * bc[b];
                if (lockdown_t_[t0]) lp += x[L.theta1];
                for (int k = 0; k < K; ++k) lp += x[L.theta_x + k] * panel_.x_at(i, t0, k);
            }
            if (lp > kLinearPredictorCap || lp < -kLinearPredictorCap) {
                rejected = true;
                return kNegInf;
            }

            const double q = std::exp(lp);
            const double phi = treated ? phi1 : phi0;
            const long y = panel_.y_at(i, t0);
            const double yd = static_cast<double>(y);

            value += lgamma_ratio(y, phi) - lgamma_y_[c] - phi * std::log1p(q / phi) +
                     yd * (lp - std::log(phi + q));

            if (want_grad) {
                const double gl = yd - q * (yd + phi) / (q + phi);
                grad[L.kappa + i] += gl;
                grad[L.beta + t0] += gl;
                for (int f = 0; f < h; ++f) {
                    grad[L.lambda + i * h + f] += gl * x[L.v + t0 * h + f];
                    grad[L.v + t0 * h + f] += gl * lambda_i[f];
                }
                for (int k = 0; k < K; ++k) {
                    grad[L.eta + k] += gl * panel_.x_at(i, t0, k);
                }
                if (treated) {
                    for (int b = 0; b < B; ++b) grad[L.w + b] += gl * bc[b];
                    if (lockdown_t_[t0]) grad[L.theta1] += gl;
                    for (int k = 0; k < K; ++k) {
                        grad[L.theta_x + k] += gl * panel_.x_at(i, t0, k);
                    }
                }
                const double dphi = digamma_ratio(y, phi) - std::log1p(q / phi) +
                                    (q - yd) / (phi + q);
                if (treated) {
                    dphi1 += dphi;
                } else {
                    dphi0 += dphi;
                }
            }
        }
    }

    if (want_grad) {
        // d/dz with phi = exp(-2z): dphi/dz = -2 phi.
        grad[L.log_xi0] += dphi0 * (-2.0 * phi0);
        if (L.log_xi1 >= 0) grad[L.log_xi1] += dphi1 * (-2.0 * phi1);
    }
    return value;
}

double PanelModel::assignment_block(std::span<const double> x, std::span<double> grad,
                                    bool& rejected) const {
    const ParamLayout& L = layout_;
    if (!L.has_assignment_block()) return 0.0;
    const int h = L.n_factors;
    const int K = L.n_covariates;
    const bool want_grad = !grad.empty();
    double value = 0.0;

    for (int i = 0; i < panel_.n_units; ++i) {
        const double kappa_i = x[L.kappa + i];
        const double* lambda_i = h > 0 ? &x[L.lambda + i * h] : nullptr;
        double base = x[L.delta0] + x[L.delta1] * kappa_i;
        for (int f = 0; f < h; ++f) base += x[L.delta_lambda + f] * lambda_i[f];
        for (int t0 = config_.t_min - 1; t0 < panel_.n_times; ++t0) {
            const std::size_t c = static_cast<std::size_t>(i) * panel_.n_times + t0;
            double lm = base;
            for (int k = 0; k < K; ++k) lm += x[L.delta_x + k] * panel_.x_at(i, t0, k);
            if (lm > kLinearPredictorCap || lm < -kLinearPredictorCap) {
                rejected = true;
                return kNegInf;
            }
            const double mu = std::exp(lm);
            const double md = static_cast<double>(increments_[c]);
            value += md * lm - mu - lgamma_m_[c];
            if (want_grad) {
                const double gm = md - mu;
                grad[L.delta0] += gm;
                grad[L.delta1] += gm * kappa_i;
                grad[L.kappa + i] += gm * x[L.delta1];
                for (int f = 0; f < h; ++f) {
                    grad[L.delta_lambda + f] += gm * lambda_i[f];
                    grad[L.lambda + i * h + f] += gm * x[L.delta_lambda + f];
                }
                for (int k = 0; k < K; ++k) {
                    grad[L.delta_x + k] += gm * panel_.x_at(i, t0, k);
                }
            }
        }
    }
    return value;
}

double PanelModel::prior_block(std::span<const double> x, std::span<double> grad) const {
    const ParamLayout& L = layout_;
    const bool want_grad = !grad.empty();
    double value = prior_const_;

    const auto gaussian = [&](int offset, int n, double var) {
        if (offset < 0) return;
        for (int j = 0; j < n; ++j) {
            const double p = x[offset + j];
            value -= 0.5 * p * p / var;
            if (want_grad) grad[offset + j] -= p / var;
        }
    };
    gaussian(L.kappa, L.n_units, priors_.kappa_var);
    gaussian(L.beta, L.n_times, priors_.scalar_var);
    gaussian(L.lambda, L.n_units * L.n_factors, priors_.vector_var);
    gaussian(L.v, L.n_times * L.n_factors, priors_.vector_var);
    gaussian(L.eta, L.n_covariates, priors_.vector_var);
    gaussian(L.w, L.n_basis, priors_.vector_var);
    if (L.theta1 >= 0) gaussian(L.theta1, 1, priors_.scalar_var);
    gaussian(L.theta_x, L.n_covariates, priors_.vector_var);
    if (L.delta0 >= 0) gaussian(L.delta0, 1, priors_.scalar_var);
    if (L.delta1 >= 0) gaussian(L.delta1, 1, priors_.scalar_var);
    if (L.delta_lambda >= 0) gaussian(L.delta_lambda, L.n_factors, priors_.vector_var);
    if (L.delta_x >= 0) gaussian(L.delta_x, L.n_covariates, priors_.vector_var);

    // Half-normal on xi = exp(z) plus the log Jacobian z.
    const auto halfnorm = [&](int offset, double sigma) {
        if (offset < 0) return;
        const double z = x[offset];
        const double xi = std::exp(z);
        value += -0.5 * xi * xi / (sigma * sigma) + z;
        if (want_grad) grad[offset] += -xi * xi / (sigma * sigma) + 1.0;
    };
    halfnorm(L.log_xi0, priors_.sigma0);
    halfnorm(L.log_xi1, priors_.sigma1);
    return value;
}

double PanelModel::log_density(std::span<const double> x, std::span<double> grad) const {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    bool rejected = false;
    double value = outcome_block(x, grad, rejected);
    if (rejected) return kNegInf;
    value += assignment_block(x, grad, rejected);
    if (rejected) return kNegInf;
    value += prior_block(x, grad);
    return std::isfinite(value) ? value : kNegInf;
}

void PanelModel::initial_point(Rng& rng, std::span<double> out) const {
    const ParamLayout& L = layout_;
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < panel_.n_units; ++i) {
        double mean = 0.0;
        for (int t0 = 0; t0 < panel_.n_times; ++t0) {
            mean += static_cast<double>(panel_.y_at(i, t0));
        }
        mean /= static_cast<double>(panel_.n_times);
        out[L.kappa + i] = std::log(mean + 0.5) + 0.1 * rng.uniform(-1.0, 1.0);
    }
    const auto jitter = [&](int offset, int n, double scale) {
        if (offset < 0) return;
        for (int j = 0; j < n; ++j) out[offset + j] = scale * rng.uniform(-1.0, 1.0);
    };
    jitter(L.beta, L.n_times, 0.1);
    jitter(L.lambda, L.n_units * L.n_factors, 0.2);
    jitter(L.v, L.n_times * L.n_factors, 0.2);
    jitter(L.eta, L.n_covariates, 0.1);
    jitter(L.w, L.n_basis, 0.1);
    if (L.theta1 >= 0) out[L.theta1] = 0.1 * rng.uniform(-1.0, 1.0);
    jitter(L.theta_x, L.n_covariates, 0.1);
    // phi ~ 10 at start: z = log(1/sqrt(10)).
    out[L.log_xi0] = -1.15 + 0.1 * rng.uniform(-1.0, 1.0);
    if (L.log_xi1 >= 0) out[L.log_xi1] = -1.15 + 0.1 * rng.uniform(-1.0, 1.0);
    if (L.delta0 >= 0) out[L.delta0] = 0.1 * rng.uniform(-1.0, 1.0);
    if (L.delta1 >= 0) out[L.delta1] = 0.1 * rng.uniform(-1.0, 1.0);
    jitter(L.delta_lambda, L.delta_lambda >= 0 ? L.n_factors : 0, 0.1);
    jitter(L.delta_x, L.delta_x >= 0 ? L.n_covariates : 0, 0.1);
}

void PanelModel::constrain(std::span<const double> unconstrained,
                           std::span<double> constrained) const {
    std::copy(unconstrained.begin(), unconstrained.end(), constrained.begin());
    const double xi0 = std::exp(unconstrained[layout_.log_xi0]);
    constrained[layout_.log_xi0] = 1.0 / (xi0 * xi0);
    if (layout_.log_xi1 >= 0) {
        const double xi1 = std::exp(unconstrained[layout_.log_xi1]);
        constrained[layout_.log_xi1] = 1.0 / (xi1 * xi1);
    }
}

} // namespace bcpanel
