#include <benchmark/benchmark.h>

#include "support/oracles.hpp"
#include "tabletrec/grad.hpp"
#include "tabletrec/raster.hpp"

using namespace tabletrec;

namespace {

void BM_RenderView(benchmark::State& state) {
  const CameraView view = oracle::test_view(int(state.range(1)), int(state.range(1)), 200.0);
  const Scene scene = oracle::random_scene(7, int(state.range(0)), view);
  RasterConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_view(scene, view, config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(1) * state.range(1));
}
BENCHMARK(BM_RenderView)->Args({5, 64})->Args({20, 128})->Args({50, 320});

void BM_BackwardRender(benchmark::State& state) {
  const CameraView base = oracle::test_view(int(state.range(1)), int(state.range(1)), 200.0);
  Scene scene = oracle::random_scene(9, int(state.range(0)), base);
  CameraView view = base;
  oracle::attach_oracle_supervision(scene, view, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        backward_render(scene, std::span(&view, 1), LossWeights{}, RasterConfig{}, LossConfig{}));
  }
}
BENCHMARK(BM_BackwardRender)->Args({5, 64})->Args({10, 128});

void BM_CompositeColor(benchmark::State& state) {
  const CameraView view = oracle::test_view(128, 128, 200.0);
  const Scene scene = oracle::random_scene(11, 10, view);
  const PseudoMesh mesh = pseudo_mesh(std::span<const Tablet>(scene.tablets));
  RasterConfig config;
  LayerStack stack = rasterize_peeled(scene.tablets, mesh, view, config);
  sample_atlas(scene.tablets, mesh, stack);
  for (auto _ : state) {
    benchmark::DoNotOptimize(composite_color(stack, scene.background));
  }
}
BENCHMARK(BM_CompositeColor);

}  // namespace
