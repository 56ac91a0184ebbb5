// Serial reference vs OpenMP kernel for the two enumeration-heavy paths.

#include <benchmark/benchmark.h>

#include "cpa/runs.hpp"

namespace {

void BM_BruteForceLaw(benchmark::State& st) {
    const auto exec = st.range(0) ? cpa::Exec::Parallel : cpa::Exec::Serial;
    const auto m = cpa::RunsModel::kruns(20, 3, 0.3);
    for (auto _ : st) benchmark::DoNotOptimize(cpa::brute_force_law(m, exec));
}
BENCHMARK(BM_BruteForceLaw)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EnumerateWindow(benchmark::State& st) {
    const auto exec = st.range(0) ? cpa::Exec::Parallel : cpa::Exec::Serial;
    const auto m = cpa::RunsModel::kruns(200, 3, 0.3);
    const cpa::UnitView v{&m, 1, cpa::neighborhood_radii(m, cpa::RadiusConvention::Wide)};
    for (auto _ : st) benchmark::DoNotOptimize(cpa::enumerate_window(v, 0, exec));
}
BENCHMARK(BM_EnumerateWindow)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ConditionalLaws(benchmark::State& st) {
    const auto exec = st.range(0) ? cpa::Exec::Parallel : cpa::Exec::Serial;
    const auto m = cpa::RunsModel::one_one(200, 0.6);
    const cpa::UnitView v{&m, 1, cpa::neighborhood_radii(m, cpa::RadiusConvention::Tight)};
    for (auto _ : st) benchmark::DoNotOptimize(cpa::conditional_laws(v, 0, exec));
}
BENCHMARK(BM_ConditionalLaws)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
