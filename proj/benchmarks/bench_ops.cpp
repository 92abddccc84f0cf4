#include <benchmark/benchmark.h>

#include "sepcnn/ops.hpp"
#include "sepcnn/rng.hpp"

using namespace sepcnn;

namespace {

// Args: spatial size, input channels, output channels.
struct ConvCase {
  Tensor x, dw, pw, sk, bias;
  ConvGeometry geom{3, 3, 1, 1, Padding::same};

  explicit ConvCase(const benchmark::State& state) {
    const auto hw = static_cast<std::size_t>(state.range(0));
    const auto cin = static_cast<std::size_t>(state.range(1));
    const auto cout = static_cast<std::size_t>(state.range(2));
    Rng rng(1);
    const UniformDist u{-1.0, 1.0};
    x = Tensor::random(Shape{8, hw, hw, cin}, u, rng);
    dw = Tensor::random(Shape{3, 3, cin}, u, rng);
    pw = Tensor::random(Shape{cin, cout}, u, rng);
    sk = Tensor::random(Shape{3, 3, cin, cout}, u, rng);
    bias = Tensor::random(Shape{cout}, u, rng);
  }
};

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({75, 32, 64})->Args({37, 64, 128})->Args({18, 128, 128});
}

void BM_Depthwise(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) benchmark::DoNotOptimize(depthwise_conv2d(c.x, c.dw, c.geom));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Depthwise)->Apply(conv_args)->Unit(benchmark::kMillisecond);

void BM_Pointwise(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) benchmark::DoNotOptimize(pointwise_conv2d(c.x, c.pw, c.bias));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Pointwise)->Apply(conv_args)->Unit(benchmark::kMillisecond);

void BM_Separable(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) benchmark::DoNotOptimize(separable_conv2d(c.x, c.dw, c.pw, c.bias, c.geom));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Separable)->Apply(conv_args)->Unit(benchmark::kMillisecond);

// Same shapes through a full 3x3 kernel, for the separable/standard cost ratio.
void BM_Standard(benchmark::State& state) {
  ConvCase c(state);
  for (auto _ : state) benchmark::DoNotOptimize(standard_conv2d(c.x, c.sk, c.bias, c.geom));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Standard)->Apply(conv_args)->Unit(benchmark::kMillisecond);

}  // namespace
