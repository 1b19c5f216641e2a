// Serial reference kernels against the OpenMP/GEMM kernels on generator-sized
// layers. Run with --benchmark_filter to pick a family.

#include <benchmark/benchmark.h>

#include <vector>

#include "lapgsr/kernels/kernels.hpp"
#include "lapgsr/kernels/reference.hpp"
#include "lapgsr/rng.hpp"

namespace {

using lapgsr::Rng;
using lapgsr::kernels::ConvGeometry;

std::vector<float> noise(int64_t n, Rng& rng) {
  std::vector<float> v(static_cast<std::size_t>(n));
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// args: channels, height, width
ConvGeometry geometry(const benchmark::State& state) {
  const int64_t c = state.range(0);
  return ConvGeometry{1, c, state.range(1), state.range(2), c, 3, 1, 1};
}

void set_flops(benchmark::State& state, const ConvGeometry& g) {
  const double flops = 2.0 * g.kernel * g.kernel * g.in_c * g.out_c * g.out_h() * g.out_w();
  state.counters["GFLOP/s"] =
      benchmark::Counter(flops * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool kParallel>
void BM_ConvForward(benchmark::State& state) {
  const ConvGeometry g = geometry(state);
  Rng rng(1);
  const auto x = noise(g.input_size(), rng), w = noise(g.weight_size(), rng), b = noise(g.out_c, rng);
  std::vector<float> y(static_cast<std::size_t>(g.output_size()));
  for (auto _ : state) {
    if constexpr (kParallel) {
      lapgsr::kernels::parallel::conv2d_forward(g, x, w, b, y);
    } else {
      lapgsr::kernels::reference::conv2d_forward<float>(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  set_flops(state, g);
}

template <bool kParallel>
void BM_ConvBackward(benchmark::State& state) {
  const ConvGeometry g = geometry(state);
  Rng rng(2);
  const auto x = noise(g.input_size(), rng), w = noise(g.weight_size(), rng), dy = noise(g.output_size(), rng);
  std::vector<float> dx(static_cast<std::size_t>(g.input_size())), dw(static_cast<std::size_t>(g.weight_size())),
      db(static_cast<std::size_t>(g.out_c));
  for (auto _ : state) {
    if constexpr (kParallel) {
      lapgsr::kernels::parallel::conv2d_backward(g, x, w, dy, dx, dw, db);
    } else {
      lapgsr::kernels::reference::conv2d_backward<float>(g, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

// Mid-branch width at half resolution and high-branch width at full
// resolution of a 320x240 frame.
void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 120, 160})->Args({12, 240, 320})->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(conv_args);

template <bool kParallel>
void BM_ResizeUp2(benchmark::State& state) {
  const int64_t planes = state.range(0), h = 120, w = 160;
  Rng rng(3);
  const auto x = noise(planes * h * w, rng);
  std::vector<float> y(static_cast<std::size_t>(planes * 4 * h * w));
  for (auto _ : state) {
    if constexpr (kParallel) {
      lapgsr::kernels::parallel::resize_forward(planes, h, w, 2 * h, 2 * w, false, x, y);
    } else {
      lapgsr::kernels::reference::resize_forward<float>(planes, h, w, 2 * h, 2 * w, false, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_ResizeUp2<false>)->Name("resize_up2/reference")->Arg(1)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ResizeUp2<true>)->Name("resize_up2/parallel")->Arg(1)->Arg(12)->Unit(benchmark::kMicrosecond);

template <bool kParallel>
void BM_InstanceNorm(benchmark::State& state) {
  const int64_t slices = state.range(0), plane = 60 * 80;
  Rng rng(4);
  const auto x = noise(slices * plane, rng);
  std::vector<float> y(x.size());
  for (auto _ : state) {
    if constexpr (kParallel) {
      lapgsr::kernels::parallel::instance_norm_forward(slices, plane, 1e-5f, x, y);
    } else {
      lapgsr::kernels::reference::instance_norm_forward<float>(slices, plane, 1e-5f, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_InstanceNorm<false>)->Name("instance_norm/reference")->Arg(128)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InstanceNorm<true>)->Name("instance_norm/parallel")->Arg(128)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
