// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "mixcrypt/autodiff/layers.hpp"
#include "mixcrypt/autodiff/ops.hpp"

namespace {

using namespace mixcrypt;

void BM_Conv2dForward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  ad::Conv2d conv(channels, channels, 3, 1, 1, rng);
  auto x = ad::init_uniform({channels, size, size}, 1, rng).detach();
  for (auto _ : state) benchmark::DoNotOptimize(conv(x));
  state.counters["MAC/s"] = benchmark::Counter(static_cast<double>(channels * channels * 9 * size * size),
                                               benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForward)->Args({8, 32})->Args({16, 16});

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  ad::Conv2d conv(channels, channels, 3, 1, 1, rng);
  auto x = ad::init_uniform({channels, size, size}, 1, rng);
  for (auto _ : state) {
    ad::sum(ad::square(conv(x))).backward();
  }
  state.counters["MAC/s"] = benchmark::Counter(3.0 * static_cast<double>(channels * channels * 9 * size * size),
                                               benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({8, 32})->Args({16, 16});

}  // namespace
