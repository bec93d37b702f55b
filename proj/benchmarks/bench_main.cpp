#include <benchmark/benchmark.h>

#include "padt/config.hpp"
#include "padt/eval.hpp"
#include "padt/train.hpp"

using namespace padt;

namespace {

RunConfig bench_cfg(const char* preset) {
  RunConfig cfg = preset_config(preset);
  cfg.out_dir.clear();
  return cfg;
}

void BM_TapeMatmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  ag::Mat a(n, n), b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = rng.normal();
    }
  for (auto _ : state) {
    ag::Tape t;
    ag::Value va = t.input(a), vb = t.input(b);
    ag::Value loss = t.mean(t.matmul(va, vb));
    t.backward(loss);
    benchmark::DoNotOptimize(t.scalar(loss));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TapeMatmul)->Arg(64)->Arg(128)->Arg(256);

void BM_EncodeImage(benchmark::State& state) {
  const RunConfig cfg = bench_cfg("toy");
  PadtModel model(cfg.model, 1);
  const GeneratedScene scene = generate_scene(42, cfg.data);
  for (auto _ : state) {
    ag::Tape t;
    EncodedImage enc = model.encode(t, scene.image);
    benchmark::DoNotOptimize(t.val(enc.patch_features));
  }
}
BENCHMARK(BM_EncodeImage);

void BM_TrainSample(benchmark::State& state) {
  const RunConfig cfg = bench_cfg("toy");
  PadtModel model(cfg.model, 1);
  const TrainingExample ex = make_example(cfg, 0);
  for (auto _ : state) {
    ag::Tape t;
    const LossTerms terms = example_losses(t, model, ex, cfg);
    t.backward(terms.total);
    benchmark::DoNotOptimize(t.scalar(terms.total));
    model.params().zero_grad();
  }
}
BENCHMARK(BM_TrainSample);

void BM_GenerateToken(benchmark::State& state) {
  const RunConfig cfg = bench_cfg("toy");
  PadtModel model(cfg.model, 1);
  const GeneratedScene scene = generate_scene(42, cfg.data);
  SceneAnnotation view;
  view.image_h = scene.ann.image_h;
  view.image_w = scene.ann.image_w;
  view.objects.push_back(scene.ann.objects[0]);
  const std::vector<int> prompt =
      prompt_ids(Task::kRec, view, cfg.model.v_text, cfg.model.grid().n_merged(),
                 nullptr);
  for (auto _ : state) {
    GenerationResult gen = model.generate(scene.image, prompt, Task::kRec, 1);
    benchmark::DoNotOptimize(gen.seq.ids.size());
  }
}
BENCHMARK(BM_GenerateToken);

void BM_DecodeGroup(benchmark::State& state) {
  const RunConfig cfg = bench_cfg("toy");
  PadtModel model(cfg.model, 1);
  const GeneratedScene scene = generate_scene(42, cfg.data);
  Rng rng(7);
  ag::Mat hidden(5, cfg.model.d);
  for (int i = 0; i < hidden.rows(); ++i)
    for (int j = 0; j < hidden.cols(); ++j) hidden(i, j) = rng.normal();
  for (auto _ : state) {
    ag::Tape t;
    EncodedImage enc = model.encode(t, scene.image);
    const auto pred = model.decoder().decode_group(
        t, model.params(), t.input(hidden), enc.patch_features,
        enc.rows_merged, enc.cols_merged);
    benchmark::DoNotOptimize(t.val(pred.box));
  }
}
BENCHMARK(BM_DecodeGroup);

}  // namespace

BENCHMARK_MAIN();
