#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>

#include "gridflow/ac_solver.hpp"
#include "gridflow/case_io.hpp"
#include "gridflow/dc_solver.hpp"
#include "gridflow/line_graph.hpp"
#include "gridflow/models.hpp"
#include "gridflow/sampler.hpp"

using namespace gridflow;

namespace {

char const* const kCases[] = {"case9", "case14", "case30", "case57", "case118", "case300"};

Grid load(std::string const& name) {
    return load_case(std::filesystem::path(GRIDFLOW_CASES_DIR) / (name + ".json")).grid;
}

void BM_SolveAc(benchmark::State& state) {
    Grid const g = load(kCases[state.range(0)]);
    for (auto _ : state) benchmark::DoNotOptimize(solve_nr(g));
    state.SetLabel(kCases[state.range(0)]);
}
BENCHMARK(BM_SolveAc)->DenseRange(0, 5)->Unit(benchmark::kMicrosecond);

void BM_SolveDc(benchmark::State& state) {
    Grid const g = load(kCases[state.range(0)]);
    for (auto _ : state) benchmark::DoNotOptimize(solve_dc(g));
    state.SetLabel(kCases[state.range(0)]);
}
BENCHMARK(BM_SolveDc)->DenseRange(0, 5)->Unit(benchmark::kMicrosecond);

void BM_PerturbedSample(benchmark::State& state) {
    Grid const g = load("case300");
    SamplerConfig c;
    c.n_samples = 1;
    c.perturb = true;
    c.threads = 1;
    Grid const grids[] = {g};
    std::uint64_t seed = 0;
    for (auto _ : state) {
        c.seed = seed++;
        benchmark::DoNotOptimize(generate_dataset(grids, c));
    }
}
BENCHMARK(BM_PerturbedSample)->Unit(benchmark::kMillisecond);

void model_forward(benchmark::State& state, ModelKind kind, std::string const& name, std::size_t batch_size) {
    Grid const g = load(name);
    auto const sample = make_sample(g, nullptr, g);
    std::vector<LineGraphSample const*> samples(batch_size, &sample);
    Batch const batch = make_batch(samples);
    auto cfg = ModelConfig::defaults(kind);
    cfg.max_buses = g.n_buses();
    cfg.max_branches = g.branches.size();
    auto const model = make_model(cfg, 1);
    for (auto _ : state) benchmark::DoNotOptimize(model->forward(batch));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch_size));
}

void model_step(benchmark::State& state, ModelKind kind, std::string const& name, std::size_t batch_size) {
    Grid const g = load(name);
    auto const sol = solve_nr(g);
    auto const sample = make_sample(g, &sol, g);
    std::vector<LineGraphSample const*> samples(batch_size, &sample);
    Batch const batch = make_batch(samples);
    auto model = make_model(ModelConfig::defaults(kind), 1);
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(*model, batch));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch_size));
}

BENCHMARK_CAPTURE(model_forward, arma_case30_b16, ModelKind::ArmaGnn, "case30", 16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_forward, gcn_case30_b16, ModelKind::GcnStack, "case30", 16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_forward, local_case30_b16, ModelKind::LocalMlp, "case30", 16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_forward, global_case30_b16, ModelKind::GlobalMlp, "case30", 16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_forward, arma_case118_b1, ModelKind::ArmaGnn, "case118", 1)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_step, arma_case30_b16, ModelKind::ArmaGnn, "case30", 16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(model_step, gcn_case30_b16, ModelKind::GcnStack, "case30", 16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
