#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bcpanel/config.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/textio.hpp"
#include "test_util.hpp"

using namespace bcpanel;

namespace {

RunConfig load_text(const std::string& text) {
    const std::string path = testutil::fresh_dir("config") + "/run.ini";
    write_text_file(path, text);
    return load_config(path);
}

} // namespace

TEST_CASE("defaults fill in: cubic spline with three interior knots") {
    const RunConfig cfg = load_text(
        "[model]\nlockdown_start = 3\nlockdown_end = 5\n");
    CHECK(cfg.spline_degree == 3);
    CHECK(cfg.n_interior_knots == 3);
    CHECK(cfg.n_factors == 1);
    CHECK(cfg.fit_mode == FitMode::Full);
    CHECK(cfg.mcmc.chains == 2);
    CHECK(cfg.mcmc.iterations == 100000);
    CHECK(cfg.mcmc.warmup == 50000);
    CHECK(cfg.mcmc.thin == 5);
    CHECK(cfg.mcmc.retained_per_chain() == 10000);
    CHECK(cfg.priors.kappa_var == 50.0);
    CHECK(cfg.priors.scalar_var == 10.0);
}

TEST_CASE("rho prior parsing") {
    const RunConfig point = load_text(
        "[model]\nlockdown_start = 1\nlockdown_end = 1\n[copula]\nrho_prior = point:0\n");
    CHECK(point.rho_prior.kind == RhoPrior::Kind::Point);
    CHECK(point.rho_prior.value == 0.0);

    const RunConfig unif = load_text(
        "[model]\nlockdown_start = 1\nlockdown_end = 1\n[copula]\nrho_prior = uniform:-1,1\n");
    CHECK(unif.rho_prior.kind == RhoPrior::Kind::Uniform);
    CHECK(unif.rho_prior.lo == -1.0);
    CHECK(unif.rho_prior.hi == 1.0);

    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const double r = unif.rho_prior.draw(rng);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
    }
    CHECK(point.rho_prior.draw(rng) == 0.0);

    CHECK_THROWS_AS(RhoPrior::parse("point:2"), ValidationError);
    CHECK_THROWS_AS(RhoPrior::parse("uniform:0.5,0.1"), ValidationError);
    CHECK_THROWS_AS(RhoPrior::parse("beta:1,1"), ValidationError);
    CHECK(RhoPrior::parse("point:0.75").value == 0.75);
    CHECK(RhoPrior::parse("uniform:0.5,1").lo == 0.5);
}

TEST_CASE("config errors") {
    CHECK_THROWS_WITH_AS(
        load_text("[model]\nlockdown_start = 5\nlockdown_end = 3\n"),
        doctest::Contains("inconsistent lockdown window"), ValidationError);
    CHECK_THROWS_WITH_AS(
        load_text("[model]\nlockdown_start = 1\nlockdown_end = 1\nfit_mode = radical\n"),
        doctest::Contains("unknown fit_mode"), ValidationError);
    CHECK_THROWS_AS(load_text("[model]\nlockdown_start = 1\nlockdown_end = 1\nbogus = 3\n"),
                    ValidationError);
    CHECK_THROWS_AS(load_text("[weird]\nx = 1\n"), ValidationError);
    CHECK_THROWS_AS(
        load_text("[mcmc]\niterations = 100\nwarmup = 100\n"
                  "\n[model]\nlockdown_start = 1\nlockdown_end = 1\n"),
        ValidationError);
}

TEST_CASE("fit modes parse") {
    CHECK(fit_mode_from_string("full") == FitMode::Full);
    CHECK(fit_mode_from_string("outcome_only") == FitMode::OutcomeOnly);
    CHECK(fit_mode_from_string("pre_intervention") == FitMode::PreIntervention);
}

TEST_CASE("resolve against panel fills t_min from first exposures") {
    const PanelData panel = testutil::make_panel(6, 12, 4, 2);
    RunConfig cfg = testutil::make_config();
    cfg.resolve_against(panel);
    int earliest = panel.n_times + 1;
    for (int g : panel.first_exposure) earliest = std::min(earliest, g);
    CHECK(cfg.t_min == earliest);

    RunConfig late = testutil::make_config();
    late.t_min = earliest + 1;
    CHECK_THROWS_AS(late.resolve_against(panel), ValidationError);

    RunConfig off_panel = testutil::make_config();
    off_panel.lockdown_start = 11;
    off_panel.lockdown_end = 13;
    CHECK_THROWS_AS(off_panel.resolve_against(panel), ValidationError);
}

TEST_CASE("config round trip") {
    RunConfig cfg = testutil::make_config(2);
    cfg.rho_prior = RhoPrior::parse("uniform:0.5,1");
    cfg.priors.sigma0 = 0.11;
    cfg.t_min = 3;
    const std::string path = testutil::fresh_dir("cfg_rt") + "/run.ini";
    write_config(cfg, path);
    const RunConfig reread = load_config(path);
    CHECK(reread.n_factors == 2);
    CHECK(reread.rho_prior.str() == cfg.rho_prior.str());
    CHECK(reread.priors.sigma0 == 0.11);
    CHECK(reread.t_min == 3);
    CHECK(reread.mcmc.seed == cfg.mcmc.seed);
}
