#include "support/synthetic.hpp"

#include <viscal/bma_model.hpp>
#include <viscal/mixture_model.hpp>

#include <benchmark/benchmark.h>

using namespace viscal;

static void BM_LogsObjective(benchmark::State& state) {
    const auto truth = testing::reference_truth();
    const auto cases = testing::to_mixture_cases(
        testing::simulate_mixture_cases(truth, static_cast<std::size_t>(state.range(0)), 3));
    for (auto _ : state) benchmark::DoNotOptimize(logs_objective(truth, cases));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogsObjective)->Arg(325)->Arg(4550);

static void BM_FitMixture(benchmark::State& state) {
    const auto truth = testing::reference_truth();
    const auto cases = testing::to_mixture_cases(
        testing::simulate_mixture_cases(truth, static_cast<std::size_t>(state.range(0)), 4));
    for (auto _ : state) benchmark::DoNotOptimize(fit_mixture(cases, false, true));
}
BENCHMARK(BM_FitMixture)->Arg(1000)->Unit(benchmark::kSecond)->Iterations(1);

static void BM_FitBma(benchmark::State& state) {
    const std::vector<MemberGroup> groups{MemberGroup::Hres, MemberGroup::Ctrl, MemberGroup::Ens};
    const auto cases = make_bma_cases(
        testing::simulate_bma_cases(static_cast<std::size_t>(state.range(0)), 5), groups);
    for (auto _ : state) benchmark::DoNotOptimize(fit_bma(cases, groups, 75.0));
}
BENCHMARK(BM_FitBma)->Arg(325)->Unit(benchmark::kMillisecond)->Iterations(1);
