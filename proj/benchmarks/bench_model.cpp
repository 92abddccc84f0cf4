#include <benchmark/benchmark.h>

#include "sepcnn/model.hpp"
#include "sepcnn/optim.hpp"

using namespace sepcnn;

namespace {

// Arg: batch size at the default 150x150x3 input.
void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  Rng rng(2);
  Model<float> model(cfg, rng);
  model.set_mode(Mode::infer);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = Tensor::random(Shape{batch, cfg.input_h, cfg.input_w, cfg.input_c}, UniformDist{0.0, 1.0}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  Rng rng(3);
  Model<float> model(cfg, rng);
  model.set_mode(Mode::train);
  Adam<float> adam(AdamConfig{});
  const std::size_t batch = 8;
  const auto x = Tensor::random(Shape{batch, cfg.input_h, cfg.input_w, cfg.input_c}, UniformDist{0.0, 1.0}, rng);
  const auto y = one_hot<float>({0, 1, 2, 3, 0, 1, 2, 3}, cfg.num_classes);
  for (auto _ : state) {
    model.zero_grad();
    model.forward(x);
    model.backward(softmax_xent_grad(model.logits(), y));
    adam.step(model);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
