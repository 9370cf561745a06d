// Serial reference vs OpenMP path for the parallel kernels.
// Arg 0 = Execution::serial, 1 = Execution::parallel.

#include <benchmark/benchmark.h>

#include "phonesense/classifiers.hpp"
#include "phonesense/evaluation.hpp"
#include "phonesense/experiment.hpp"
#include "phonesense/features.hpp"
#include "phonesense/preprocess.hpp"
#include "phonesense/synthgen.hpp"

using namespace phonesense;

namespace {

const std::vector<WindowSample>& windows() {
  static const auto w = [] {
    const auto preset = GeneratorPreset::strong(42);
    std::vector<Session> sessions;
    for (std::size_t i = 0; i < 66; ++i) sessions.push_back(generate_session(preset, i, i < 33 ? Group::phone : Group::nophone));
    return build_windows(sessions, SmoothingSpec{0}, {});
  }();
  return w;
}

const FusedDataset& dataset() {
  static const auto d = FeatureTable::build(windows()).assemble(resolve_signal_set("all").channels);
  return d;
}

Execution exec_of(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

void BM_FeatureTable(benchmark::State& state) {
  const auto& w = windows();
  for (auto _ : state) benchmark::DoNotOptimize(FeatureTable::build(w, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}

void BM_ForestTrain(benchmark::State& state) {
  const auto& d = dataset();
  const auto z = zscore_fit(d.features).apply(d.features);
  for (auto _ : state) benchmark::DoNotOptimize(rf_train(z, d.labels, 250, 42, exec_of(state)));
}

void BM_LeaveOneOut(benchmark::State& state) {
  const auto& d = dataset();
  PipelineConfig cfg;
  cfg.model = ModelSpec::svm(SvmKernel::linear);
  for (auto _ : state) benchmark::DoNotOptimize(run_loo(d, cfg, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_FeatureTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestTrain)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LeaveOneOut)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
