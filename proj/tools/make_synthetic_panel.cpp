// Regenerates data/synthetic_panel.csv and data/synthetic_config.ini: a
// 22-unit x 65-month NB panel with staggered integer exposures, shaped like
// the case-finding application (5 never-exposed units, adoption spread over
// months 25..60, a lockdown dip in months 51..55, counts averaging ~39 per
// cell). Deterministic; committed output should only change when this file
// does.

#include <cmath>
#include <cstdio>
#include <string>

#include "bcpanel/config.hpp"
#include "bcpanel/panel.hpp"
#include "bcpanel/rng.hpp"
#include "bcpanel/spline.hpp"

using namespace bcpanel;

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "data";
    const int N = 22, T = 65;
    const int lockdown_start = 51, lockdown_end = 55;
    Rng rng(20210531);

    PanelData panel;
    panel.n_units = N;
    panel.n_times = T;
    panel.n_covariates = 0;
    panel.y.resize(N * T);
    panel.a.assign(N * T, 0);
    for (int i = 0; i < N; ++i) {
        char label[16];
        std::snprintf(label, sizeof(label), "ODN%02d", i + 1);
        panel.unit_labels.push_back(label);
    }
    for (int t = 1; t <= T; ++t) panel.time_labels.push_back(std::to_string(t));

    // Staggered adoption: 17 adopters from month 25 on, 5 never-exposed.
    for (int i = 0; i < N; ++i) {
        if (i % 4 == 3 || i == N - 1) continue;
        const int adopt = 25 + (i * 5) % 33 + (i % 3);
        long level = 0;
        for (int t = adopt; t <= T; ++t) {
            if (t == adopt) level = 1;
            else if ((t - adopt) % 14 == 0 && level < 3) ++level;
            panel.a[i * T + t - 1] = level;
        }
    }

    std::vector<double> kappa(N), lambda(N), beta(T), v(T);
    for (int i = 0; i < N; ++i) {
        kappa[i] = std::log(36.0) + 0.45 * rng.normal();
        lambda[i] = 0.25 * rng.normal();
    }
    for (int t = 0; t < T; ++t) {
        // mild seasonality plus a slow drift and the lockdown dip
        beta[t] = 0.05 * std::sin(2.0 * M_PI * t / 12.0) + 0.002 * t +
                  0.04 * rng.normal();
        if (t + 1 >= lockdown_start && t + 1 <= lockdown_end) beta[t] -= 0.55;
        v[t] = 0.6 * rng.normal();
    }

    // Concave dose response peaking near 16 peer-months, stronger in lockdown.
    const auto s_true = [](double c) {
        return c <= 0.0 ? 0.0 : 0.30 * (c / 16.0) * std::exp(1.0 - c / 16.0);
    };
    const double theta1 = 0.35;
    const double phi0 = 14.0, phi1 = 11.0;

    for (int i = 0; i < N; ++i) {
        double cum = 0.0;
        for (int t = 1; t <= T; ++t) {
            cum += static_cast<double>(panel.a[i * T + t - 1]);
            double lp = kappa[i] + beta[t - 1] + lambda[i] * v[t - 1];
            double phi = phi0;
            if (cum > 0.0) {
                lp += s_true(cum);
                if (t >= lockdown_start && t <= lockdown_end) lp += theta1;
                phi = phi1;
            }
            panel.y[i * T + t - 1] = rng.negbin(std::exp(lp), phi);
        }
    }
    panel.derive_first_exposure();
    write_panel(panel, out_dir + "/synthetic_panel.csv");

    RunConfig cfg;
    cfg.n_factors = 1;
    cfg.lockdown_start = lockdown_start;
    cfg.lockdown_end = lockdown_end;
    cfg.fit_mode = FitMode::Full;
    cfg.rho_prior = RhoPrior::parse("point:1");
    cfg.mcmc.chains = 2;
    cfg.mcmc.iterations = 4000;
    cfg.mcmc.warmup = 2000;
    cfg.mcmc.thin = 5;
    cfg.mcmc.seed = 7;
    write_config(cfg, out_dir + "/synthetic_config.ini");

    long total = 0;
    int exposed = 0;
    for (long y : panel.y) total += y;
    exposed = panel.n_exposed_cells();
    std::printf("wrote %s: total y = %ld, mean %.2f, exposed cells = %d\n",
                (out_dir + "/synthetic_panel.csv").c_str(), total,
                static_cast<double>(total) / (N * T), exposed);
    return 0;
}
