// Parallel kernels against the serial reference implementations.

#include <benchmark/benchmark.h>

#include "arkl/divergences.hpp"
#include "arkl/learners.hpp"
#include "arkl/reference.hpp"

using namespace arkl;

namespace {

SeqPolicy random_policy(int H, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<StepPolicy> steps;
  for (int h = 0; h < H; ++h) {
    steps.push_back(StepPolicy::tabular(d, h, h, [&](std::span<const Token>, std::span<double> row) {
      double total = 0.0;
      for (auto& x : row) total += (x = 0.05 + uniform01(rng));
      for (auto& x : row) x /= total;
    }));
  }
  return SeqPolicy(std::move(steps));
}

std::vector<StepPolicy> random_base(int count, int H, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<StepPolicy> base;
  for (int j = 0; j < count; ++j) {
    base.push_back(StepPolicy::tabular(d, 0, H - 1, [&](std::span<const Token>, std::span<double> row) {
      double total = 0.0;
      for (auto& x : row) total += (x = 0.05 + uniform01(rng));
      for (auto& x : row) x /= total;
    }));
  }
  return base;
}

void BM_JointKlKernel(benchmark::State& state) {
  const int H = static_cast<int>(state.range(0));
  const auto p = random_policy(H, 4, 1);
  const auto q = random_policy(H, 4, 2);
  for (auto _ : state) benchmark::DoNotOptimize(joint_kl_exact(p, q).value);
}

void BM_JointKlReference(benchmark::State& state) {
  const int H = static_cast<int>(state.range(0));
  const auto p = random_policy(H, 4, 1);
  const auto q = random_policy(H, 4, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reference::joint_kl(p, q));
}

void BM_HellingerKernel(benchmark::State& state) {
  const int H = static_cast<int>(state.range(0));
  const auto p = random_policy(H, 4, 3);
  const auto q = random_policy(H, 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(squared_hellinger(p, q).value);
}

void BM_HellingerReference(benchmark::State& state) {
  const int H = static_cast<int>(state.range(0));
  const auto p = random_policy(H, 4, 3);
  const auto q = random_policy(H, 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(reference::squared_hellinger(p, q));
}

void BM_StepLossKernel(benchmark::State& state) {
  const auto base = random_base(16, 6, 3, 5);
  Rng rng(6);
  const auto data = sample_dataset(random_policy(6, 3, 7), static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(step_loss_table(base, data));
}

void BM_StepLossReference(benchmark::State& state) {
  const auto base = random_base(16, 6, 3, 5);
  Rng rng(6);
  const auto data = sample_dataset(random_policy(6, 3, 7), static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(reference::step_loss_table(base, data));
}

}  // namespace

BENCHMARK(BM_JointKlKernel)->Arg(6)->Arg(9);
BENCHMARK(BM_JointKlReference)->Arg(6)->Arg(9);
BENCHMARK(BM_HellingerKernel)->Arg(6)->Arg(9);
BENCHMARK(BM_HellingerReference)->Arg(6)->Arg(9);
BENCHMARK(BM_StepLossKernel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_StepLossReference)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
