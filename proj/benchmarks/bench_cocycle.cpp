#include <benchmark/benchmark.h>

#include "qpc/reducer.hpp"

namespace {

void BM_IteratePrefix(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const qpc::Cocycle c = qpc::almost_mathieu(
      0.5, 0.0, qpc::Frequency::rational(q - 1, q), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(qpc::iterate_prefix(c, q));
}
BENCHMARK(BM_IteratePrefix)->Arg(21)->Arg(55)->Arg(144);

void BM_Lyapunov(benchmark::State& state) {
  const qpc::Cocycle c =
      qpc::almost_mathieu(2.0, 0.0, qpc::Frequency::parse("golden"), 0.1);
  for (auto _ : state)
    benchmark::DoNotOptimize(qpc::lyapunov(c, 0.0, state.range(0), 16));
}
BENCHMARK(BM_Lyapunov)->Arg(1000)->Arg(10000);

void BM_ReduceAmo(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const int p = q == 21 ? 13 : 34;
  const qpc::Cocycle c =
      qpc::almost_mathieu(0.5, 0.0, qpc::Frequency::rational(p, q), 0.1);
  qpc::ReductionConfig cfg = qpc::ReductionConfig::defaults_for(0.05);
  for (auto _ : state) benchmark::DoNotOptimize(qpc::reduce(c, cfg));
}
BENCHMARK(BM_ReduceAmo)->Unit(benchmark::kMillisecond)->Arg(21)->Arg(55);

}  // namespace
