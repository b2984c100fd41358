#include <benchmark/benchmark.h>

#include <random>

#include "qpc/strip.hpp"

namespace {

qpc::StripFunction make_random(int order) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<qpc::cdouble> c(2 * order + 1);
  for (auto& v : c) v = qpc::cdouble(u(rng), u(rng));
  return qpc::StripFunction(std::move(c), 0.1);
}

void BM_Multiply(benchmark::State& state) {
  const qpc::StripFunction f = make_random(static_cast<int>(state.range(0)));
  const qpc::StripFunction g = make_random(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f * g);
}
BENCHMARK(BM_Multiply)->Arg(16)->Arg(64)->Arg(256)->Arg(1024);

void BM_StripNorm(benchmark::State& state) {
  const qpc::StripFunction f = make_random(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f.strip_norm(0.05));
}
BENCHMARK(BM_StripNorm)->Arg(64)->Arg(512);

void BM_EvalGrid(benchmark::State& state) {
  const qpc::StripFunction f = make_random(256);
  for (auto _ : state)
    benchmark::DoNotOptimize(f.eval_grid(static_cast<int>(state.range(0)), 0.03));
}
BENCHMARK(BM_EvalGrid)->Arg(1024)->Arg(8192);

}  // namespace
