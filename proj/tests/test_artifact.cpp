#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "bcpanel/artifact.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/textio.hpp"
#include "test_util.hpp"

using namespace bcpanel;

namespace {

FitArtifact small_fit(const std::string& dir) {
    const PanelData panel = testutil::make_panel(5, 8, 4, 2);
    RunConfig config = testutil::make_config(1);
    config.n_interior_knots = 1;
    config.mcmc.chains = 2;
    config.mcmc.iterations = 200;
    config.mcmc.warmup = 100;
    config.mcmc.thin = 2;
    return write_fit_artifact(dir, panel, config, 2);
}

} // namespace

TEST_CASE("artifact round trip") {
    const std::string dir = testutil::fresh_dir("artifact");
    const FitArtifact written = small_fit(dir);
    const FitArtifact reread = FitArtifact::open(dir);

    CHECK(reread.n_draws() == written.n_draws());
    CHECK(reread.n_draws() == 2 * 50);
    CHECK(reread.rows == written.rows);
    CHECK(reread.lp == written.lp);
    CHECK(reread.chain_id == written.chain_id);
    CHECK(reread.basis.interior_knots == written.basis.interior_knots);
    CHECK(reread.basis.hi == written.basis.hi);
    CHECK(reread.layout.total == written.layout.total);
    CHECK(reread.config.t_min == written.config.t_min);
    CHECK(reread.panel.y == written.panel.y);

    // phi columns on the constrained scale are positive in every draw
    for (long d = 0; d < reread.n_draws(); ++d) {
        CHECK(reread.rows[d * reread.layout.total + reread.layout.log_xi0] > 0.0);
        CHECK(reread.rows[d * reread.layout.total + reread.layout.log_xi1] > 0.0);
    }

    // expected files exist
    for (const char* name : {"meta.json", "panel.csv", "config.ini", "basis.json",
                             "draws.csv", "diagnostics.txt"}) {
        CHECK(std::filesystem::exists(dir + "/" + name));
    }
}

TEST_CASE("version stamp is checked") {
    const std::string dir = testutil::fresh_dir("artifact_version");
    small_fit(dir);
    std::string meta = read_text_file(dir + "/meta.json");
    const auto at = meta.find("\"artifact_format\": 1");
    REQUIRE(at != std::string::npos);
    meta.replace(at, std::string("\"artifact_format\": 1").size(),
                 "\"artifact_format\": 999");
    write_text_file(dir + "/meta.json", meta);
    CHECK_THROWS_WITH_AS(FitArtifact::open(dir), doctest::Contains("format version"),
                         IoError);
}

TEST_CASE("missing or corrupt artifacts error as IO") {
    CHECK_THROWS_AS(FitArtifact::open("/nonexistent/artifact"), IoError);
    const std::string dir = testutil::fresh_dir("artifact_corrupt");
    small_fit(dir);
    write_text_file(dir + "/draws.csv", "chain,draw\n1,1\n");
    CHECK_THROWS_AS(FitArtifact::open(dir), IoError);
}

TEST_CASE("basis serialization reproduces evaluations bit-exactly") {
    const std::string dir = testutil::fresh_dir("artifact_basis");
    const FitArtifact art = small_fit(dir);
    const FitArtifact reread = FitArtifact::open(dir);
    for (double c = 0.0; c <= art.basis.hi; c += 0.3) {
        CHECK(art.basis.eval(c) == reread.basis.eval(c));
    }
}
