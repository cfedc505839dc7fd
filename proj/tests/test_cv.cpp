#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bcpanel/artifact.hpp"
#include "bcpanel/cv.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/model.hpp"
#include "test_util.hpp"

using namespace bcpanel;

TEST_CASE("interval score pinned values") {
    CHECK(interval_score(5.0, 0.0, 10.0) == 10.0);               // inside: width
    CHECK(interval_score(12.0, 0.0, 10.0, 0.05) == 90.0);        // 10 + 40*2
    CHECK(interval_score(0.0, 0.0, 10.0) == 10.0);               // boundary is inside
    CHECK(interval_score(10.0, 0.0, 10.0) == 10.0);
    CHECK(interval_score(-1.0, 0.0, 10.0, 0.05) == 50.0);        // 10 + 40*1
    CHECK_THROWS_AS(interval_score(1.0, 2.0, 1.0), ValidationError);
    CHECK_THROWS_AS(interval_score(1.0, 0.0, 1.0, 0.0), ValidationError);
}

TEST_CASE("mask: one cell per exposed unit, controls untouched") {
    const PanelData panel = testutil::make_panel(8, 12, 4, 3); // 5 exposed units
    Rng rng(41);
    const auto mask = make_cv_mask(panel, rng);
    CHECK(mask.size() == 5);
    std::set<int> units;
    for (const auto& [unit, t] : mask) {
        units.insert(unit);
        CHECK(t >= 1);
        CHECK(t <= panel.n_times);
        CHECK(panel.first_exposure[unit - 1] <= panel.n_times); // never a control
    }
    CHECK(units.size() == 5);
}

TEST_CASE("masked cells drop out of the outcome likelihood") {
    const PanelData panel = testutil::make_panel(6, 10, 4, 2);
    RunConfig config = testutil::make_config(1);
    config.resolve_against(panel);
    const SplineBasis basis = basis_for(panel, config);
    const PriorSpec priors = PriorSpec::resolve(config.priors, panel);

    std::vector<std::uint8_t> mask(panel.n_units * panel.n_times, 0);
    mask[2 * panel.n_times + 5] = 1; // unit 3, time 6

    PanelData perturbed = panel;
    perturbed.y[2 * panel.n_times + 5] += 57;

    PanelModel masked_a(panel, config, basis, priors, mask);
    PanelModel masked_b(perturbed, config, basis, priors, mask);
    PanelModel unmasked_a(panel, config, basis, priors);
    PanelModel unmasked_b(perturbed, config, basis, priors);

    Rng rng(3);
    std::vector<double> x(masked_a.dim());
    for (auto& v : x) v = 0.2 * rng.normal();
    x[masked_a.layout().kappa + 2] = std::log(30.0);

    CHECK(masked_a.log_density(x, {}) == masked_b.log_density(x, {}));
    CHECK(unmasked_a.log_density(x, {}) != unmasked_b.log_density(x, {}));
}

TEST_CASE("argmin is scale invariant and ties break toward smaller h") {
    // Pure selection logic exercised through the aggregate comparator:
    // scaling all MSPEs cannot change the winner.
    std::vector<CvAggregate> aggs = {{0, 200.0, 50.0, 0}, {1, 150.0, 40.0, 0},
                                     {2, 150.0, 45.0, 0}, {3, 180.0, 60.0, 0}};
    const auto pick = [](const std::vector<CvAggregate>& rows) {
        int best_h = rows.front().h;
        double best = rows.front().mspe;
        for (const auto& r : rows) {
            if (r.mspe < best || (r.mspe == best && r.h < best_h)) {
                best = r.mspe;
                best_h = r.h;
            }
        }
        return best_h;
    };
    CHECK(pick(aggs) == 1);
    for (auto& r : aggs) r.mspe *= 17.0;
    CHECK(pick(aggs) == 1);
}

TEST_CASE("run_cv on a small panel") {
    const PanelData panel = testutil::make_panel(6, 10, 4, 2);
    RunConfig config = testutil::make_config(1);

    CvOptions options;
    options.h_grid = {0};
    options.n_replicates = 2;
    options.seed = 5;
    options.threads = 2;
    options.mcmc.chains = 2;
    options.mcmc.iterations = 600;
    options.mcmc.warmup = 300;
    options.mcmc.thin = 1;
    options.rhat_threshold = 10.0; // no exclusions at this budget

    const CvResult result = run_cv(panel, config, options);
    CHECK(result.selected_h == 0); // h_grid = {0} trivially selects the DD model
    REQUIRE(result.aggregates.size() == 1);
    CHECK(result.aggregates[0].mspe > 0.0);
    CHECK(result.aggregates[0].is > 0.0);
    CHECK(result.cells.size() == 2);

    // MSPE aggregates are sums over replicates: invariant to replicate order.
    const double total = result.cells[0].mspe + result.cells[1].mspe;
    CHECK(result.aggregates[0].mspe == doctest::Approx(total));
}

TEST_CASE("cv input validation") {
    const PanelData controls_only = testutil::make_panel(3, 8, 4, 3);
    RunConfig config = testutil::make_config(1);
    CvOptions options;
    options.mcmc.iterations = 200;
    options.mcmc.warmup = 100;
    CHECK_THROWS_AS(run_cv(controls_only, config, options), ValidationError);

    const PanelData ok = testutil::make_panel(4, 8, 4, 1);
    options.h_grid = {};
    CHECK_THROWS_AS(run_cv(ok, config, options), ValidationError);
}
