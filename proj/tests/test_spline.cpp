#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "bcpanel/errors.hpp"
#include "bcpanel/rng.hpp"
#include "bcpanel/spline.hpp"

using namespace bcpanel;

namespace {

// Independent Cox-de Boor oracle: naive recursion with the 0/0 := 0
// convention, evaluated over the full clamped knot vector.
double deboor_recursive(const std::vector<double>& t, int i, int p, double x) {
    if (p == 0) {
        const bool last = static_cast<std::size_t>(i + 1) == t.size() - 1 ||
                          (t[i + 1] == t.back() && t[i] < t[i + 1]);
        if (last) return (x >= t[i] && x <= t[i + 1]) ? 1.0 : 0.0;
        return (x >= t[i] && x < t[i + 1]) ? 1.0 : 0.0;
    }
    double left = 0.0, right = 0.0;
    if (t[i + p] != t[i]) {
        left = (x - t[i]) / (t[i + p] - t[i]) * deboor_recursive(t, i, p - 1, x);
    }
    if (t[i + p + 1] != t[i + 1]) {
        right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) *
                deboor_recursive(t, i + 1, p - 1, x);
    }
    return left + right;
}

SplineBasis default_basis() {
    std::vector<double> exposures;
    for (int v = 1; v <= 40; ++v) exposures.push_back(static_cast<double>(v));
    return SplineBasis::build(exposures, 3, 3);
}

} // namespace

TEST_CASE("interior knots sit at the quantiles of positive exposures") {
    const SplineBasis basis = default_basis();
    REQUIRE(basis.interior_knots.size() == 3);
    CHECK(basis.interior_knots[0] == doctest::Approx(10.75).epsilon(1e-14));
    CHECK(basis.interior_knots[1] == doctest::Approx(20.5).epsilon(1e-14));
    CHECK(basis.interior_knots[2] == doctest::Approx(30.25).epsilon(1e-14));
    CHECK(basis.lo == 0.0);
    CHECK(basis.hi == 40.0);
}

TEST_CASE("basis sizes") {
    CHECK(default_basis().n_basis() == 6);
    CHECK(default_basis().n_full() == 7);
    std::vector<double> exposures;
    for (int v = 1; v <= 10; ++v) exposures.push_back(static_cast<double>(v));
    const SplineBasis degenerate = SplineBasis::build(exposures, 3, 0);
    CHECK(degenerate.n_basis() == 3);
    CHECK(degenerate.interior_knots.empty());
}

TEST_CASE("too few distinct positive exposures is an error") {
    CHECK_THROWS_AS(SplineBasis::build({1.0, 2.0, 3.0, 3.0}, 3, 3), ValidationError);
    CHECK_THROWS_AS(SplineBasis::build({}, 3, 3), ValidationError);
}

TEST_CASE("partition of unity over the full family") {
    const SplineBasis basis = default_basis();
    Rng rng(5);
    std::vector<double> full(basis.n_full());
    for (int i = 0; i < 1000; ++i) {
        const double c = rng.uniform(basis.lo, basis.hi);
        basis.eval_full(c, full);
        const double sum = std::accumulate(full.begin(), full.end(), 0.0);
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
    // The model columns sum to one exactly left of the last interior knot.
    for (double c : {0.0, 1.0, 10.75, 17.0, 30.25}) {
        const auto cols = basis.eval(c);
        CHECK(std::fabs(std::accumulate(cols.begin(), cols.end(), 0.0) - 1.0) < 1e-12);
    }
}

TEST_CASE("clamped boundary: single 1 in the first position at lo") {
    const SplineBasis basis = default_basis();
    const auto cols = basis.eval(basis.lo);
    CHECK(cols[0] == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t b = 1; b < cols.size(); ++b) CHECK(cols[b] == 0.0);
    // Evaluation clamps out-of-range arguments instead of extrapolating.
    CHECK(basis.eval(-5.0) == basis.eval(basis.lo));
    CHECK(basis.eval(basis.hi + 9.0) == basis.eval(basis.hi));
}

TEST_CASE("values match the recursive de Boor oracle") {
    const SplineBasis basis = default_basis();
    const auto knots = basis.knot_vector();
    std::vector<double> full(basis.n_full());
    Rng rng(17);
    for (int rep = 0; rep < 300; ++rep) {
        const double c = rep == 0 ? 15.0 : rng.uniform(basis.lo, basis.hi);
        basis.eval_full(c, full);
        for (int b = 0; b < basis.n_full(); ++b) {
            const double oracle = deboor_recursive(knots, b, basis.degree, c);
            CHECK(std::fabs(full[b] - oracle) < 1e-12);
        }
    }
}

TEST_CASE("local support") {
    const SplineBasis basis = default_basis();
    const auto knots = basis.knot_vector();
    std::vector<double> full(basis.n_full());
    Rng rng(23);
    for (int rep = 0; rep < 500; ++rep) {
        const double c = rng.uniform(basis.lo, basis.hi);
        basis.eval_full(c, full);
        for (int b = 0; b < basis.n_full(); ++b) {
            const bool inside = c >= knots[b] && c <= knots[b + basis.degree + 1];
            if (!inside) CHECK(full[b] == 0.0);
        }
    }
}

TEST_CASE("continuity across the interior knots") {
    const SplineBasis basis = default_basis();
    // C^{p-1}: value and first two divided differences agree across each knot.
    for (double knot : basis.interior_knots) {
        const double h = 1e-6;
        const auto below = basis.eval(knot - h);
        const auto at = basis.eval(knot);
        const auto above = basis.eval(knot + h);
        for (int b = 0; b < basis.n_basis(); ++b) {
            CHECK(std::fabs(above[b] - below[b]) < 1e-4);                  // C^0
            const double d1 = (at[b] - below[b]) / h;
            const double d2 = (above[b] - at[b]) / h;
            CHECK(std::fabs(d2 - d1) < 1e-3);                              // C^1
        }
    }
}

TEST_CASE("coefficient evaluation") {
    const SplineBasis basis = default_basis();
    const std::vector<double> w = {0.1, -0.2, 0.3, 0.05, -0.1, 0.2};
    const auto cols = basis.eval(15.0);
    double expect = 0.0;
    for (int b = 0; b < 6; ++b) expect += w[b] * cols[b];
    CHECK(basis.value(15.0, w) == doctest::Approx(expect).epsilon(1e-15));
}
