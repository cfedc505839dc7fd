#include <benchmark/benchmark.h>

#include "bcpanel/copula.hpp"
#include "bcpanel/countdist.hpp"
#include "bcpanel/rng.hpp"

using namespace bcpanel;

namespace {

void BM_NegbinLogpmf(benchmark::State& state) {
    long y = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(negbin_logpmf(y, 38.0, 12.0));
        y = (y + 7) % 120;
    }
}

void BM_NegbinCdf(benchmark::State& state) {
    long y = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(negbin_cdf(y, 38.0, 12.0));
        y = (y + 7) % 120;
    }
}

void BM_NegbinQuantile(benchmark::State& state) {
    double p = 0.01;
    for (auto _ : state) {
        benchmark::DoNotOptimize(negbin_quantile(p, 38.0, 12.0));
        p += 0.017;
        if (p >= 1.0) p -= 0.99;
    }
}

void BM_CopulaImpute(benchmark::State& state) {
    Rng rng(5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            copula_impute_negbin(41, 45.0, 11.0, 38.0, 14.0, 0.75, rng));
    }
}

} // namespace

BENCHMARK(BM_NegbinLogpmf);
BENCHMARK(BM_NegbinCdf);
BENCHMARK(BM_NegbinQuantile);
BENCHMARK(BM_CopulaImpute);
