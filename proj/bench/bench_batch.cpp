#include "mrac/batch.hpp"

#include <benchmark/benchmark.h>

using namespace mrac;

namespace {

std::vector<BatchItem> mimo_items(int count) {
  std::vector<BatchItem> items;
  for (int s = 0; s < count; ++s) {
    for (const char* scheme : {"direct_gradient", "indirect_gradient"}) {
      BatchItem it;
      it.label = std::string(scheme) + " seed " + std::to_string(s);
      it.doc = {{"scheme", scheme},
                {"time_domain", "discrete"},
                {"seed", s},
                {"random_system", Json::object()},
                {"horizon", 5000}};
      items.push_back(std::move(it));
    }
  }
  return items;
}

void BM_batch_serial(benchmark::State& state) {
  const auto items = mimo_items(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_batch_serial(items));
}

void BM_batch_parallel(benchmark::State& state) {
  const auto items = mimo_items(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_batch_parallel(items, 0));
}

}  // namespace

BENCHMARK(BM_batch_serial)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_batch_parallel)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
