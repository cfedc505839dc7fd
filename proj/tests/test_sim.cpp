#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bcpanel/errors.hpp"
#include "bcpanel/sim.hpp"
#include "test_util.hpp"

using namespace bcpanel;

namespace {

SimScenario desk_scenario() {
    SimScenario sc;
    sc.n_units = 30;
    sc.n_times = 12;
    sc.t_min = 6;
    sc.n_datasets = 4;
    sc.mcmc.chains = 2;
    sc.mcmc.iterations = 500;
    sc.mcmc.warmup = 250;
    sc.mcmc.thin = 1;
    return sc;
}

} // namespace

TEST_CASE("generated datasets have the scenario dimensions") {
    SimScenario sc; // paper-scale defaults
    const SimDataset ds = generate_dataset(sc, 11);
    CHECK(ds.panel.n_units == 100);
    CHECK(ds.panel.n_times == 12);
    for (int i = 0; i < ds.panel.n_units; ++i) {
        for (int t = 1; t < sc.t_min; ++t) {
            CHECK(ds.panel.a_at(i, t - 1) == 0); // exposure only from t_min on
        }
    }
    // hyperdraws stay inside their ranges
    CHECK(ds.hypers.lambda0 >= sc.lambda0_lo);
    CHECK(ds.hypers.lambda0 <= sc.lambda0_hi);
    CHECK(ds.hypers.theta >= sc.theta_lo);
    CHECK(ds.hypers.theta <= sc.theta_hi);
    CHECK(ds.hypers.delta1 >= sc.delta1_lo);
    CHECK(ds.hypers.delta1 <= sc.delta1_hi);
}

TEST_CASE("reproducibility: seed and scenario determine the dataset") {
    const SimScenario sc = desk_scenario();
    const SimDataset a = generate_dataset(sc, 321);
    const SimDataset b = generate_dataset(sc, 321);
    CHECK(a.panel.y == b.panel.y);
    CHECK(a.panel.a == b.panel.a);
    CHECK(a.tau_true == b.tau_true);
    CHECK(a.hypers.kappa0 == b.hypers.kappa0);
    const SimDataset c = generate_dataset(sc, 322);
    CHECK(a.panel.y != c.panel.y);
}

TEST_CASE("true tau recomputes exactly from the stored potential outcomes") {
    const SimDataset ds = generate_dataset(desk_scenario(), 7);
    long tau = 0;
    for (int i = 0; i < ds.panel.n_units; ++i) {
        for (int t = 1; t <= ds.panel.n_times; ++t) {
            const std::size_t c = static_cast<std::size_t>(i) * ds.panel.n_times + t - 1;
            if (ds.panel.cum_exposure(i, t) > 0) {
                tau += ds.y_treated[c] - ds.y_untreated[c];
                CHECK(ds.panel.y_at(i, t - 1) == ds.y_treated[c]);
            } else {
                CHECK(ds.y_treated[c] == ds.y_untreated[c]);
                CHECK(ds.panel.y_at(i, t - 1) == ds.y_untreated[c]);
            }
        }
    }
    CHECK(tau == ds.tau_true);
}

TEST_CASE("null-effect DGM centers tau at zero") {
    SimScenario sc = desk_scenario();
    sc.theta_lo = sc.theta_hi = 0.0;
    sc.sigma_psi_lo = 1e-9;
    sc.sigma_psi_hi = 2e-9;
    double mean_tau = 0.0;
    const int reps = 40;
    for (int r = 0; r < reps; ++r) {
        mean_tau += static_cast<double>(generate_dataset(sc, 1000 + r).tau_true);
    }
    mean_tau /= reps;
    // With psi == 0 the comonotone pair is identical, so tau is exactly 0.
    CHECK(mean_tau == 0.0);
}

TEST_CASE("first exposed month draws its effect at log(1) = 0") {
    // With sigma_psi -> 0 and a unit first increment, q1 = q0 at cum = 1, so
    // the ITE in that month is 0 under the shared-uniform coupling.
    SimScenario sc = desk_scenario();
    sc.sigma_psi_lo = 1e-12;
    sc.sigma_psi_hi = 2e-12;
    const SimDataset ds = generate_dataset(sc, 3);
    for (int i = 0; i < ds.panel.n_units; ++i) {
        for (int t = 1; t <= ds.panel.n_times; ++t) {
            if (ds.panel.cum_exposure(i, t) == 1.0) {
                const std::size_t c =
                    static_cast<std::size_t>(i) * ds.panel.n_times + t - 1;
                CHECK(ds.y_treated[c] == ds.y_untreated[c]);
            }
        }
    }
}

TEST_CASE("sim model gradients match finite differences") {
    SimScenario sc = desk_scenario();
    sc.n_units = 12;
    const SimDataset ds = generate_dataset(sc, 13);
    Rng rng(6);
    for (const SimFitMode mode : {SimFitMode::Full, SimFitMode::Cut}) {
        const int dim = sim_fit_dim(ds, sc, mode);
        std::vector<double> x(dim), grad(dim), probe(dim);
        for (int rep = 0; rep < 8; ++rep) {
            for (auto& v : x) v = 0.4 * rng.normal();
            sim_fit_log_density(ds, sc, mode, x, grad);
            probe = x;
            const double h = 1e-5;
            for (int j = 0; j < dim; ++j) {
                probe[j] = x[j] + h;
                const double up = sim_fit_log_density(ds, sc, mode, probe, {});
                probe[j] = x[j] - h;
                const double down = sim_fit_log_density(ds, sc, mode, probe, {});
                probe[j] = x[j];
                const double fd = (up - down) / (2.0 * h);
                const double err = std::fabs(fd - grad[j]) /
                                   std::max({1.0, std::fabs(fd), std::fabs(grad[j])});
                CHECK(err < 1e-6);
            }
        }
    }

    SimScenario tiny = sc;
    tiny.mcmc.iterations = 120;
    tiny.mcmc.warmup = 60;
    const SimFitResult fit = fit_sim(ds, SimFitMode::Full, tiny, 5);
    CHECK(std::isfinite(fit.tau_hat));
    CHECK(fit.ci_lo <= fit.ci_hi);
}

TEST_CASE("study plumbing: shared datasets, empty-report errors") {
    SimScenario sc = desk_scenario();
    sc.n_datasets = 2;
    sc.mcmc.iterations = 150;
    sc.mcmc.warmup = 70;

    const SimReport report =
        run_study(sc, {SimFitMode::Full, SimFitMode::Cut}, 91, 2);
    REQUIRE(report.rows.size() == 4);
    // both modes consumed the same datasets: identical tau_true and seeds
    for (int d = 0; d < 2; ++d) {
        const auto& full = report.rows[2 * d];
        const auto& cut = report.rows[2 * d + 1];
        CHECK(full.mode == SimFitMode::Full);
        CHECK(cut.mode == SimFitMode::Cut);
        CHECK(full.tau_true == cut.tau_true);
        CHECK(full.seed == cut.seed);
    }
    CHECK(report.aggregates.size() == 2);
    CHECK(report.hyperdraws.size() == 2);

    SimScenario empty = sc;
    empty.n_datasets = 0;
    CHECK_THROWS_AS(run_study(empty, {SimFitMode::Full}, 1, 1), ValidationError);
    CHECK_THROWS_AS(run_study(sc, {}, 1, 1), ValidationError);
}

TEST_CASE("coverage sanity on a short desk-scale run") {
    // Not the acceptance criterion (that runs at 250 datasets); this smoke
    // checks that full-mode intervals are not degenerate and typically cover.
    SimScenario sc = desk_scenario();
    sc.n_units = 40;
    sc.n_datasets = 6;
    sc.mcmc.iterations = 700;
    sc.mcmc.warmup = 350;
    const SimReport report = run_study(sc, {SimFitMode::Full}, 2024, 2);
    int covered = 0, used = 0;
    for (const auto& row : report.rows) {
        if (!row.converged) continue;
        ++used;
        covered += row.covered ? 1 : 0;
        CHECK(row.width > 0.0);
    }
    REQUIRE(used >= 4);
    CHECK(covered >= used / 2);
}
