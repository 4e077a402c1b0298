// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <random>

#include "power_flow_cases.hpp"
#include "support.hpp"
#include "vvc/scenario.hpp"

using namespace vvc;

namespace {

const NetworkPulsePlant& settled_plant() {
    static const NetworkPulsePlant plant = [] {
        PlantConfig cfg;
        cfg.v_hv_pu = 1.075;
        cfg.reactive_capability_limit = true;
        return identification_plant(testing_support::benchmark(), ModelSpec{}, cfg);
    }();
    return plant;
}

std::vector<InjectionSet> injection_cases(const PerUnitNetwork& net, std::size_t n) {
    std::mt19937_64 rng(1);
    std::vector<InjectionSet> cases;
    for (std::size_t i = 0; i < n; ++i) cases.push_back(testing_support::randomized(*testing_support::benchmark(), net, rng));
    return cases;
}

template <auto Solve>
void power_flow_batch(benchmark::State& state) {
    const auto net = to_per_unit(*testing_support::benchmark());
    const auto cases = injection_cases(net, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Solve(net, cases, Complex{1.02, 0.0}, PowerFlowOptions{}));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Identify>
void identification(benchmark::State& state) {
    IdentifyOptions opts;
    opts.M = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Identify(settled_plant(), opts));
}

template <auto Run>
void scenario_batch(benchmark::State& state) {
    const auto dir = testing_support::data_dir() / "scenarios";
    std::vector<ScenarioSpec> specs;
    for (const auto* name : {"experiment1_7am", "experiment1_1am", "experiment1_1pm", "experiment1_7pm",
                             "experiment2_no_oltc", "experiment2_oltc"})
        specs.push_back(load_scenario(dir / (std::string(name) + ".json")));
    for (auto _ : state) benchmark::DoNotOptimize(Run(specs));
}

}  // namespace

BENCHMARK(power_flow_batch<solve_batch>)->Name("solve_batch")->Arg(64)->Arg(512);
BENCHMARK(power_flow_batch<solve_batch_serial>)->Name("solve_batch_serial")->Arg(64)->Arg(512);
BENCHMARK(identification<identify>)->Name("identify")->Arg(90)->Unit(benchmark::kMillisecond);
BENCHMARK(identification<identify_serial>)->Name("identify_serial")->Arg(90)->Unit(benchmark::kMillisecond);
BENCHMARK(scenario_batch<run_batch>)->Name("run_batch")->Unit(benchmark::kMillisecond);
BENCHMARK(scenario_batch<run_batch_serial>)->Name("run_batch_serial")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
