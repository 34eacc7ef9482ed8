// Microbenchmarks for the hot paths: convolution forward/backward (the
// training bottleneck), event accumulation, SSIM, and the metric battery.

#include <benchmark/benchmark.h>

#include <vector>

#include "evsynth/event_ops.hpp"
#include "evsynth/metrics.hpp"
#include "evsynth/rng.hpp"
#include "evsynth/tensor.hpp"

namespace {

using namespace evsynth;

Tensor random_tensor(Shape shape, uint64_t seed, float lo = 0.0f,
                     float hi = 1.0f) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(shape);
  for (float& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  Tape off(false);
  Tensor x = random_tensor(Shape({8, 16, 32, 32}), 1);
  Tensor k = random_tensor(Shape({32, 16, 4, 4}), 2, -0.1f, 0.1f);
  Tensor b = Tensor::zeros(Shape({32}));
  for (auto _ : state) {
    Tensor y = conv2d(off, x, k, b, 2, 1);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2dForward)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  for (auto _ : state) {
    state.PauseTiming();
    Tape tape(true);
    Tensor x = random_tensor(Shape({8, 16, 32, 32}), 1);
    Tensor k = random_tensor(Shape({32, 16, 4, 4}), 2, -0.1f, 0.1f);
    Tensor b = Tensor::zeros(Shape({32}));
    k.set_requires_grad(true);
    b.set_requires_grad(true);
    Tensor y = conv2d(tape, x, k, b, 2, 1);
    Tensor loss = mean_all(tape, y);
    state.ResumeTiming();
    tape.backward(loss);
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_AccumulateEvents(benchmark::State& state) {
  Rng rng(7);
  std::vector<Event> events;
  events.reserve(100000);
  uint64_t t = 0;
  for (int i = 0; i < 100000; ++i) {
    t += rng.uniform_int(200);
    events.push_back(Event{static_cast<uint16_t>(rng.uniform_int(64)),
                           static_cast<uint16_t>(rng.uniform_int(64)), t,
                           rng.uniform_int(2) ? int8_t{1} : int8_t{-1}});
  }
  AccumulationWindow window(0, t + 1);
  for (auto _ : state) {
    EventFrame f = accumulate_events(events, window, 64, 64, 127);
    benchmark::DoNotOptimize(f.values.data());
  }
}
BENCHMARK(BM_AccumulateEvents)->Unit(benchmark::kMicrosecond);

void BM_Ssim(benchmark::State& state) {
  Tape off(false);
  Tensor a = random_tensor(Shape({1, 3, 64, 64}), 3);
  Tensor b = random_tensor(Shape({1, 3, 64, 64}), 4);
  for (auto _ : state) {
    Tensor s = ssim(off, a, b);
    benchmark::DoNotOptimize(s.item());
  }
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMicrosecond);

void BM_MetricReport(benchmark::State& state) {
  Rng rng(5);
  IntensityFrame a(3, 64, 64), b(3, 64, 64);
  for (float& v : a.values) v = rng.uniform(0.0f, 1.0f);
  for (float& v : b.values) v = rng.uniform(0.0f, 1.0f);
  for (auto _ : state) {
    MetricReport r = evaluate_pair(a, b);
    benchmark::DoNotOptimize(r.l1);
  }
}
BENCHMARK(BM_MetricReport)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
