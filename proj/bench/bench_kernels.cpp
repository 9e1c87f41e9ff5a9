// Serial reference against OpenMP kernels. Both paths return identical bits,
// so the only difference measured is wall time.

#include <benchmark/benchmark.h>

#include <vector>

#include "watermarket/kernels.hpp"
#include "watermarket/random.hpp"

namespace wm = watermarket;
namespace k = watermarket::kernels;

namespace {

std::vector<wm::Participant> population(std::size_t n, std::uint64_t seed) {
    wm::Rng rng(seed);
    std::vector<wm::Participant> ps(n);
    for (std::size_t i = 0; i < n; ++i)
        ps[i] = {static_cast<wm::ParticipantId>(i + 1), rng.uniform(0.1, 5.0), rng.uniform(0.0, 2.0),
                 rng.uniform(0.0, 100.0)};
    return ps;
}

wm::MarketConfig config() {
    wm::MarketConfig cfg;
    cfg.gamma = 0.5;
    cfg.crop_price = 280.0;
    return cfg;
}

k::Execution mode(const benchmark::State& state) {
    return state.range(1) ? k::Execution::parallel : k::Execution::serial;
}

void BM_ExcessDemand(benchmark::State& state) {
    const auto ps = population(static_cast<std::size_t>(state.range(0)), 1);
    const auto cfg = config();
    for (auto _ : state) benchmark::DoNotOptimize(k::excess_demand(40.0, ps, cfg, mode(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GainMatrix(benchmark::State& state) {
    const auto ps = population(static_cast<std::size_t>(state.range(0)), 2);
    const auto cfg = config();
    for (auto _ : state) benchmark::DoNotOptimize(k::gain_matrix(ps, cfg, mode(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_ClearMarkets(benchmark::State& state) {
    std::vector<wm::Market> markets;
    for (std::int64_t m = 0; m < state.range(0); ++m)
        markets.push_back({config(), population(50, static_cast<std::uint64_t>(m) + 10)});
    for (auto _ : state)
        benchmark::DoNotOptimize(k::clear_markets(markets, wm::ClearingMethod::closed_form, mode(state)));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ExcessDemand)->ArgsProduct({{1 << 10, 1 << 14, 1 << 18}, {0, 1}})->ArgNames({"n", "parallel"});
BENCHMARK(BM_GainMatrix)->ArgsProduct({{32, 128, 256}, {0, 1}})->ArgNames({"n", "parallel"})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClearMarkets)->ArgsProduct({{16, 256, 2048}, {0, 1}})->ArgNames({"markets", "parallel"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
