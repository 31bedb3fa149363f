#include "support/synthetic.hpp"

#include <viscal/verification.hpp>

#include <benchmark/benchmark.h>

using namespace viscal;

static void BM_EnsembleCrps(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::vector<double> m(static_cast<std::size_t>(state.range(0)));
    for (auto& v : m) v = std::uniform_real_distribution<double>(0.0, 75.0)(rng);
    for (auto _ : state) benchmark::DoNotOptimize(crps_ensemble(m, 20.0));
}
BENCHMARK(BM_EnsembleCrps)->Arg(51)->Arg(52)->Arg(1000);

static void BM_MixtureCrpsMc(benchmark::State& state) {
    const MixturePredictive mix(0.4, CensoredLaw<GammaLaw>(GammaLaw(2.0, 3.0), 75.0),
                                CensoredLaw<TruncNormalLaw>(TruncNormalLaw(30.0, 10.0), 75.0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(crps_mc(mix, 12.0, static_cast<std::size_t>(state.range(0)), ++seed));
    }
}
BENCHMARK(BM_MixtureCrpsMc)->Arg(1000)->Arg(10000);

static void BM_StationaryBootstrap(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::vector<double> x(static_cast<std::size_t>(state.range(0)));
    for (auto& v : x) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    for (auto _ : state) benchmark::DoNotOptimize(stationary_bootstrap(x));
}
BENCHMARK(BM_StationaryBootstrap)->Arg(365)->Arg(3650)->Unit(benchmark::kMillisecond);
