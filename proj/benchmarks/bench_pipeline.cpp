#include <benchmark/benchmark.h>

#include "composer/train.hpp"

using namespace composer;

namespace {

ModelConfig bench_model_config() {
  ModelConfig cfg;
  cfg.canvas_h = 32;
  cfg.canvas_w = 24;
  cfg.levels = 3;
  cfg.dims = {6, 12, 24};
  cfg.text_dim = 16;
  cfg.time_dim = 16;
  cfg.binding = BindingMode::kBind123;
  cfg.init_seed = 1;
  return cfg;
}

void BM_DenoiserForward(benchmark::State& state) {
  const CompositionModel model(bench_model_config());
  const TextEmbedder embedder(16, 1);
  DatasetConfig dcfg;
  dcfg.count = 1;
  dcfg.canvas_h = 32;
  dcfg.canvas_w = 24;
  dcfg.seed = 1;
  const PreparedSample ps = prepare_sample(model, embedder, make_sample(dcfg, 0));
  const NoiseSchedule s = default_schedule(50);
  GraphParams params = GraphParams::wrap(model.params(), false);
  RefTaps taps =
      model.reference_forward(params, ps.ref.ref_input, ps.text, ps.ref.selections, ps.ref.phrases);
  Rng rng(2);
  const Tensor z_t = rng.normal_tensor({4, 16, 12});
  const Tensor input = assemble_conditioning(RunMode::kGeneration, z_t, ps.aux);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.denoiser_forward(params, input, 25, ps.text, &taps));
  }
}
BENCHMARK(BM_DenoiserForward);

void BM_TrainStep(benchmark::State& state) {
  DatasetConfig dcfg;
  dcfg.count = 4;
  dcfg.canvas_h = 32;
  dcfg.canvas_w = 24;
  dcfg.seed = 3;
  std::vector<DatasetSample> data;
  for (int i = 0; i < dcfg.count; ++i) data.push_back(make_sample(dcfg, i));
  const TextEmbedder embedder(16, 1);
  TrainConfig tcfg;
  tcfg.steps = 1;
  tcfg.T = 50;
  tcfg.seed = 4;
  for (auto _ : state) {
    state.PauseTiming();
    CompositionModel model(bench_model_config());
    state.ResumeTiming();
    benchmark::DoNotOptimize(train(model, data, embedder, tcfg));
  }
}
BENCHMARK(BM_TrainStep);

void BM_ReferenceForward(benchmark::State& state) {
  const CompositionModel model(bench_model_config());
  const TextEmbedder embedder(16, 1);
  DatasetConfig dcfg;
  dcfg.count = 1;
  dcfg.canvas_h = 32;
  dcfg.canvas_w = 24;
  dcfg.seed = 1;
  const PreparedSample ps = prepare_sample(model, embedder, make_sample(dcfg, 0));
  GraphParams params = GraphParams::wrap(model.params(), false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.reference_forward(params, ps.ref.ref_input, ps.text,
                                                     ps.ref.selections, ps.ref.phrases));
  }
}
BENCHMARK(BM_ReferenceForward);

}  // namespace
