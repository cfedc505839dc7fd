#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "bcpanel/config.hpp"
#include "bcpanel/panel.hpp"

namespace testutil {

inline std::string fresh_dir(const std::string& tag) {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("bcpanel_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline bool close_rel(double a, double b, double tol) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= tol * scale;
}

/// Small staggered panel: units adopt at staggered times with unit steps.
inline bcpanel::PanelData make_panel(int n_units, int n_times, int first_adopter_t,
                                     int n_controls, unsigned seed = 7) {
    bcpanel::PanelData p;
    p.n_units = n_units;
    p.n_times = n_times;
    p.n_covariates = 0;
    std::srand(seed);
    for (int i = 0; i < n_units; ++i) {
        p.unit_labels.push_back("unit" + std::to_string(i + 1));
    }
    for (int t = 1; t <= n_times; ++t) p.time_labels.push_back(std::to_string(t));
    p.y.resize(static_cast<std::size_t>(n_units) * n_times);
    p.a.resize(static_cast<std::size_t>(n_units) * n_times);
    for (int i = 0; i < n_units; ++i) {
        const bool control = i < n_controls;
        const int adopt = first_adopter_t + (i % 5);
        long level = 0;
        for (int t = 1; t <= n_times; ++t) {
            const std::size_t c = static_cast<std::size_t>(i) * n_times + t - 1;
            if (!control && t >= adopt && (t == adopt || t % 7 == 0)) ++level;
            p.a[c] = level;
            p.y[c] = 20 + (std::rand() % 25) + 2 * (t % 4) + 3 * (i % 3);
        }
    }
    p.derive_first_exposure();
    return p;
}

inline bcpanel::RunConfig make_config(int n_factors = 1) {
    bcpanel::RunConfig cfg;
    cfg.n_factors = n_factors;
    cfg.lockdown_start = 1;
    cfg.lockdown_end = 1;
    cfg.mcmc.chains = 2;
    cfg.mcmc.iterations = 400;
    cfg.mcmc.warmup = 200;
    cfg.mcmc.thin = 1;
    cfg.mcmc.seed = 11;
    return cfg;
}

} // namespace testutil
