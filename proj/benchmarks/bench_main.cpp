#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "llvd/data.hpp"
#include "llvd/flops.hpp"
#include "llvd/metrics.hpp"
#include "llvd/model.hpp"
#include "llvd/ops.hpp"
#include "llvd/tape.hpp"
#include "llvd/tensor.hpp"

// Microbenchmarks for the kernels that dominate a denoising run. Items
// processed are multiply-accumulates, so the reported rate is MAC/s.

using namespace llvd;

namespace {

Tensor filled(std::vector<int64_t> dims, NoiseStream& rng) {
  Tensor t = Tensor::zeros(std::move(dims));
  float* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = float(rng.uniform() - 0.5);
  return t;
}

ModelConfig narrow_config() {
  ModelConfig cfg;
  cfg.stage_widths = {4, 6, 8};
  cfg.lstm_hidden = 8;
  cfg.lstm_layers = 2;
  cfg.kernel = 3;
  cfg.in_channels = 3;
  cfg.shuffle = 2;
  cfg.conv_per_stage = 2;
  return cfg;
}

ModelConfig compact_config() {
  ModelConfig cfg;
  cfg.stage_widths = {20, 40, 80};
  cfg.lstm_hidden = 80;
  cfg.lstm_layers = 2;
  cfg.kernel = 3;
  cfg.in_channels = 3;
  cfg.shuffle = 2;
  cfg.conv_per_stage = 5;
  return cfg;
}

}  // namespace

static void BM_conv2d(benchmark::State& state) {
  const int64_t c = state.range(0);
  const int64_t hw = state.range(1);
  const int stride = int(state.range(2));
  NoiseStream rng(1, 0);
  Tensor x = filled({1, c, hw, hw}, rng);
  Tensor w = filled({c, c, 3, 3}, rng);
  Tensor b = filled({c}, rng);
  int64_t out_hw = 0;
  for (auto _ : state) {
    Tensor y = ops::conv2d(x, w, b, stride, 1);
    out_hw = y.dims[2];
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 9 * c * c * out_hw * out_hw);
}
BENCHMARK(BM_conv2d)->Args({16, 64, 1})->Args({32, 64, 1})->Args({16, 128, 1})->Args({16, 64, 2});

static void BM_conv2d_transpose(benchmark::State& state) {
  const int64_t c = state.range(0);
  const int64_t hw = state.range(1);
  NoiseStream rng(2, 0);
  Tensor x = filled({1, c, hw, hw}, rng);
  Tensor w = filled({c, c, 3, 3}, rng);
  Tensor b = filled({c}, rng);
  for (auto _ : state) {
    Tensor y = ops::conv2d_transpose(x, w, b, 2, 1, 1);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 9 * c * c * hw * hw);
}
BENCHMARK(BM_conv2d_transpose)->Args({16, 32})->Args({32, 32});

static void BM_pixel_shuffle_round_trip(benchmark::State& state) {
  const int64_t hw = state.range(0);
  NoiseStream rng(3, 0);
  Tensor x = filled({1, 3, hw, hw}, rng);
  for (auto _ : state) {
    Tensor y = ops::pixel_shuffle(ops::pixel_unshuffle(x, 2), 2);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_pixel_shuffle_round_trip)->Arg(128)->Arg(256);

static void BM_ssim(benchmark::State& state) {
  const int64_t hw = state.range(0);
  NoiseStream rng(4, 0);
  Tensor a = filled({1, 3, hw, hw}, rng);
  Tensor b = filled({1, 3, hw, hw}, rng);
  for (auto _ : state) {
    Tensor s = ops::mean(ssim(a, b));
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * a.numel());
}
BENCHMARK(BM_ssim)->Arg(64)->Arg(128);

static void BM_model_step(benchmark::State& state) {
  const bool compact = state.range(0) != 0;
  const int64_t hw = state.range(1);
  const ModelConfig cfg = compact ? compact_config() : narrow_config();
  Model model(cfg);
  model.init_params(5);
  NoiseStream rng(6, 0);
  Tensor frame = filled({1, 3, hw, hw}, rng);
  RecurrentState recurrent;
  for (auto _ : state) {
    Tensor out = model.step(frame, recurrent);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * count_flops(cfg, hw, hw).macs);
  state.SetLabel(compact ? "compact" : "narrow");
}
BENCHMARK(BM_model_step)->Args({0, 128})->Args({1, 64})->Unit(benchmark::kMillisecond);

static void BM_train_step_gradients(benchmark::State& state) {
  const int64_t hw = state.range(0);
  Model model(narrow_config());
  model.init_params(5);
  NoiseStream rng(7, 0);
  std::vector<Tensor> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(filled({1, 3, hw, hw}, rng));
  for (auto _ : state) {
    Tape<float> tape;
    for (auto& [name, param] : model.params()) tape.watch(param);
    RecurrentState recurrent;
    Tensor loss;
    for (int t = 0; t < 3; ++t) {
      Tensor frame_loss = composite_loss(model.step(frames[t], recurrent), frames[t]);
      loss = t == 0 ? frame_loss : ops::add(loss, frame_loss);
    }
    GradientMap<float> grads = tape.backward(ops::scale(loss, 1.0f / 3.0f));
    benchmark::DoNotOptimize(&grads);
  }
  state.SetItemsProcessed(state.iterations() * 3 * count_flops(narrow_config(), hw, hw).macs);
}
BENCHMARK(BM_train_step_gradients)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
