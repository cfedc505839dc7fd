#include <benchmark/benchmark.h>

#include <vector>

#include "bcpanel/artifact.hpp"
#include "bcpanel/model.hpp"
#include "bcpanel/rng.hpp"
#include "bcpanel/spline.hpp"

using namespace bcpanel;

namespace {

struct Setup {
    PanelData panel;
    RunConfig config;
    SplineBasis basis;
    PriorSpec priors;

    Setup(int n_units, int n_times, FitMode mode) {
        Rng rng(3);
        panel.n_units = n_units;
        panel.n_times = n_times;
        panel.n_covariates = 0;
        panel.y.resize(n_units * n_times);
        panel.a.assign(n_units * n_times, 0);
        for (int i = 0; i < n_units; ++i) {
            panel.unit_labels.push_back("u" + std::to_string(i + 1));
        }
        for (int t = 1; t <= n_times; ++t) panel.time_labels.push_back(std::to_string(t));
        for (int i = 0; i < n_units; ++i) {
            long level = 0;
            for (int t = 1; t <= n_times; ++t) {
                if (i % 4 != 0 && t >= n_times / 3 + (i % 6) && (t % 9 == 0 || level == 0)) {
                    ++level;
                }
                panel.a[i * n_times + t - 1] = level;
                panel.y[i * n_times + t - 1] = rng.poisson(35.0);
            }
        }
        panel.derive_first_exposure();
        config.n_factors = 1;
        config.lockdown_start = (3 * n_times) / 4;
        config.lockdown_end = config.lockdown_start + 3;
        config.fit_mode = mode;
        config.resolve_against(panel);
        basis = basis_for(panel, config);
        priors = PriorSpec::resolve(config.priors, panel);
    }
};

void bench_log_density(benchmark::State& state, FitMode mode, bool with_grad) {
    Setup setup(22, 65, mode);
    PanelModel model(setup.panel, setup.config, setup.basis, setup.priors);
    Rng rng(9);
    std::vector<double> x(model.dim());
    for (auto& v : x) v = 0.1 * rng.normal();
    x[model.layout().log_xi0] = -1.0;
    if (model.layout().log_xi1 >= 0) x[model.layout().log_xi1] = -1.0;
    std::vector<double> grad(with_grad ? model.dim() : 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.log_density(x, grad));
    }
}

void BM_LogDensityFull(benchmark::State& state) {
    bench_log_density(state, FitMode::Full, false);
}
void BM_GradientFull(benchmark::State& state) {
    bench_log_density(state, FitMode::Full, true);
}
void BM_GradientOutcomeOnly(benchmark::State& state) {
    bench_log_density(state, FitMode::OutcomeOnly, true);
}

void BM_SplineEval(benchmark::State& state) {
    Setup setup(22, 65, FitMode::Full);
    std::vector<double> cols(setup.basis.n_basis());
    double c = 0.0;
    for (auto _ : state) {
        setup.basis.eval(c, cols);
        benchmark::DoNotOptimize(cols.data());
        c += 0.37;
        if (c > setup.basis.hi) c = 0.0;
    }
}

} // namespace

BENCHMARK(BM_LogDensityFull);
BENCHMARK(BM_GradientFull);
BENCHMARK(BM_GradientOutcomeOnly);
BENCHMARK(BM_SplineEval);
