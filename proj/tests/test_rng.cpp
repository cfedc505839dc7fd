#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bcpanel/rng.hpp"

using namespace bcpanel;

TEST_CASE("fixed seed reproduces the stream exactly") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.uniform01() == b.uniform01());
        CHECK(a.normal() == b.normal());
        CHECK(a.poisson(7.3) == b.poisson(7.3));
        CHECK(a.gamma(2.5) == b.gamma(2.5));
    }
}

TEST_CASE("derived seeds differ across streams") {
    const auto s0 = Rng::derive_seed(42, 0);
    const auto s1 = Rng::derive_seed(42, 1);
    const auto s2 = Rng::derive_seed(43, 0);
    CHECK(s0 != s1);
    CHECK(s0 != s2);
    CHECK(Rng::derive_seed(42, 0) == s0);
}

TEST_CASE("variate moments") {
    Rng rng(7);
    const int n = 400000;

    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::fabs(sum / n) < 0.01);
    CHECK(std::fabs(sq / n - 1.0) < 0.02);

    // Gamma(3.4): mean 3.4, var 3.4.
    sum = sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gamma(3.4);
        sum += g;
        sq += g * g;
    }
    const double gm = sum / n;
    CHECK(std::fabs(gm - 3.4) < 0.03);
    CHECK(std::fabs(sq / n - gm * gm - 3.4) < 0.1);

    // Gamma with shape < 1 (boost path).
    sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.gamma(0.4);
    CHECK(std::fabs(sum / n - 0.4) < 0.02);

    // Poisson small and large means (both algorithm branches).
    for (double mu : {2.5, 80.0}) {
        sum = sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double y = static_cast<double>(rng.poisson(mu));
            sum += y;
            sq += y * y;
        }
        const double m = sum / n;
        CHECK(std::fabs(m - mu) < 0.05 * mu);
        CHECK(std::fabs(sq / n - m * m - mu) < 0.1 * mu);
    }

    // NegBin(q, phi): mean q, variance q + q^2/phi.
    const double q = 12.0, phi = 3.0;
    sum = sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = static_cast<double>(rng.negbin(q, phi));
        sum += y;
        sq += y * y;
    }
    const double m = sum / n;
    const double v = sq / n - m * m;
    CHECK(std::fabs(m - q) < 0.15);
    CHECK(std::fabs(v - (q + q * q / phi)) < 2.0);
}
