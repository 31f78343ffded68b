#include <benchmark/benchmark.h>

#include <lepkit/dynamics.hpp>
#include <lepkit/ep.hpp>
#include <lepkit/extraction.hpp>
#include <lepkit/pipeline.hpp>
#include <lepkit/spectral.hpp>

using namespace lep;

namespace {

const SystemParams kPoint(1.0, 0.3, 2.5, 0.2);

void BM_ClosedForm(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(spectral::eigenvalues_closed_form(kPoint));
}
BENCHMARK(BM_ClosedForm);

void BM_EigenFull(benchmark::State& st) {
    const auto l = build_liouvillian(kPoint);
    for (auto _ : st) benchmark::DoNotOptimize(spectral::eigen_full(l));
}
BENCHMARK(BM_EigenFull);

void BM_LocateEp2(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(ep::locate_ep2(0.2, 0.0, 3.0, 10.0));
}
BENCHMARK(BM_LocateEp2);

void BM_LocateEp3(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(ep::locate_ep3(0.2));
}
BENCHMARK(BM_LocateEp3);

void BM_TraceLines(benchmark::State& st) {
    ep::LineTraceOptions o;
    o.delta_samples = static_cast<int>(st.range(0));
    o.gamma_samples = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(ep::trace_exceptional_lines(0.0, {-1.0, 1.0}, {2.0, 6.0}, o));
}
BENCHMARK(BM_TraceLines)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_EvolveMaster(benchmark::State& st) {
    const auto grid = dynamics::uniform_grid(0.0, 0.1, 128);
    for (auto _ : st) benchmark::DoNotOptimize(dynamics::evolve_master(kPoint, DensityMatrix::ground(), grid));
}
BENCHMARK(BM_EvolveMaster)->Unit(benchmark::kMicrosecond);

void BM_MonteCarlo(benchmark::State& st) {
    const auto grid = dynamics::uniform_grid(0.0, 0.4, 21);
    dynamics::McOptions o;
    o.n_traj = static_cast<std::size_t>(st.range(0));
    o.workers = 1;
    for (auto _ : st) benchmark::DoNotOptimize(dynamics::mc_trajectories(kPoint, ket::g(), grid, o));
}
BENCHMARK(BM_MonteCarlo)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Extraction(benchmark::State& st) {
    expsim::PipelineConfig cfg;
    const auto series = expsim::measured_series(kPoint, cfg, 1);
    for (auto _ : st) benchmark::DoNotOptimize(expsim::extract_eigenvalues(series));
}
BENCHMARK(BM_Extraction)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
