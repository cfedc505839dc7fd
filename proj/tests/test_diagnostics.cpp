#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bcpanel/diagnostics.hpp"
#include "bcpanel/errors.hpp"
#include "bcpanel/rng.hpp"
#include "bcpanel/special.hpp"

using namespace bcpanel;

namespace {

// Straight-line reference implementation of rank-normalized split R-hat,
// written independently of the library code path.
double reference_rhat(std::vector<std::vector<double>> chains, bool fold) {
    // split
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        halves.push_back({c.begin(), c.begin() + half});
        halves.push_back({c.end() - half, c.end()});
    }
    if (fold) {
        std::vector<double> pool;
        for (const auto& c : halves) pool.insert(pool.end(), c.begin(), c.end());
        std::sort(pool.begin(), pool.end());
        const double med = pool.size() % 2 ? pool[pool.size() / 2]
                                           : 0.5 * (pool[pool.size() / 2 - 1] +
                                                    pool[pool.size() / 2]);
        for (auto& c : halves) {
            for (auto& v : c) v = std::fabs(v - med);
        }
    }
    // pooled average ranks
    struct Item { double v; std::size_t c, j; };
    std::vector<Item> items;
    for (std::size_t c = 0; c < halves.size(); ++c) {
        for (std::size_t j = 0; j < halves[c].size(); ++j) items.push_back({halves[c][j], c, j});
    }
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.v < b.v; });
    const double S = static_cast<double>(items.size());
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].v == items[i].v) ++j;
        double rank_sum = 0.0;
        for (std::size_t k = i; k < j; ++k) rank_sum += static_cast<double>(k + 1);
        const double r = rank_sum / static_cast<double>(j - i);
        const double z = norm_quantile((r - 0.375) / (S + 0.25));
        for (std::size_t k = i; k < j; ++k) halves[items[k].c][items[k].j] = z;
        i = j;
    }
    // classic split rhat
    const double m = static_cast<double>(halves.size());
    const double n = static_cast<double>(halves[0].size());
    std::vector<double> means;
    double w = 0.0;
    for (const auto& c : halves) {
        double mu = 0.0;
        for (double v : c) mu += v;
        mu /= n;
        means.push_back(mu);
        double s2 = 0.0;
        for (double v : c) s2 += (v - mu) * (v - mu);
        w += s2 / (n - 1.0);
    }
    w /= m;
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= m;
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= n / (m - 1.0);
    return std::sqrt(((n - 1.0) / n * w + b / n) / w);
}

} // namespace

TEST_CASE("same-distribution chains: rhat below 1.01") {
    Rng rng(8);
    std::vector<std::vector<double>> chains(2, std::vector<double>(1000));
    for (auto& c : chains) {
        for (auto& v : c) v = rng.normal();
    }
    const auto diag = compute_rhat(chains);
    CHECK(!diag.zero_variance);
    CHECK(diag.rhat < 1.01);
}

TEST_CASE("offset chains: rhat far above 1.1") {
    Rng rng(9);
    std::vector<std::vector<double>> chains(2, std::vector<double>(500));
    for (auto& v : chains[0]) v = rng.normal();
    for (auto& v : chains[1]) v = 10.0 + rng.normal();
    // rank normalization bounds the statistic for fully separated chains;
    // ~1.8 here, still far beyond the 1.1 alarm level
    CHECK(compute_rhat(chains).rhat > 1.5);
}

TEST_CASE("rhat matches the reference implementation on a fixed array") {
    Rng rng(1234);
    std::vector<std::vector<double>> chains(2, std::vector<double>(1000));
    for (std::size_t j = 0; j < 1000; ++j) {
        chains[0][j] = rng.normal() + 0.002 * j; // mild trend
        chains[1][j] = 1.3 * rng.normal();
    }
    const double expected = std::max(reference_rhat(chains, false), reference_rhat(chains, true));
    CHECK(compute_rhat(chains).rhat == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("constant chains flag zero variance") {
    std::vector<std::vector<double>> chains(2, std::vector<double>(100, 3.25));
    const auto rhat = compute_rhat(chains);
    CHECK(rhat.zero_variance);
    CHECK(rhat.rhat == 1.0);
    const auto ess = compute_ess(chains);
    CHECK(ess.zero_variance);
    CHECK(std::isnan(ess.ess));
}

TEST_CASE("diagnostics input validation") {
    CHECK_THROWS_AS(compute_rhat({{1.0, 2.0, 3.0, 4.0}}), ValidationError);
    CHECK_THROWS_AS(compute_rhat({{1.0, 2.0}, {1.0, 2.0}}), ValidationError);
    CHECK_THROWS_AS(compute_rhat({{1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 3.0}}),
                    ValidationError);
}

TEST_CASE("white noise ESS is close to the sample size") {
    Rng rng(10);
    const long n = 20000;
    std::vector<std::vector<double>> chains(1, std::vector<double>(n));
    for (auto& v : chains[0]) v = rng.normal();
    const auto diag = compute_ess(chains);
    CHECK(diag.ess > 0.9 * n);
    CHECK(diag.ess < 1.1 * n);
}

TEST_CASE("AR(1) ESS matches the analytic rate") {
    Rng rng(11);
    const long n = 200000;
    const double coef = 0.9;
    std::vector<std::vector<double>> chains(1, std::vector<double>(n));
    double x = 0.0;
    for (long j = 0; j < n; ++j) {
        x = coef * x + std::sqrt(1.0 - coef * coef) * rng.normal();
        chains[0][j] = x;
    }
    const double expected = n * (1.0 - coef) / (1.0 + coef);
    const auto diag = compute_ess(chains);
    CHECK(diag.ess > 0.75 * expected);
    CHECK(diag.ess < 1.30 * expected);
}
