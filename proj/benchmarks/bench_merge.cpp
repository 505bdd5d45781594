#include <benchmark/benchmark.h>

#include <random>

#include "tabletrec/kdtree.hpp"
#include "tabletrec/merge.hpp"

using namespace tabletrec;

namespace {

std::vector<UnitTablet> random_units(int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<UnitTablet> units(n);
  for (int i = 0; i < n; ++i) {
    units[i].center = {4 * uni(rng), 4 * uni(rng), 0.02 * uni(rng)};
    units[i].normal = normalized(Vec3{0.05 * uni(rng), 0.05 * uni(rng), 1.0});
    units[i].mean_color = {0.5 + 0.05 * uni(rng), 0.5, 0.5};
    units[i].current_id = units[i].initial_id = i;
    units[i].source_camera = int(rng() % 8);
  }
  return units;
}

void BM_MergePass(benchmark::State& state) {
  const auto units = random_units(int(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(merge_pass(units, MergeConfig{}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MergePass)->Arg(1000)->Arg(5000)->Arg(20000);

void BM_KdTreeKnn(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vec3> points(size_t(state.range(0)));
  for (Vec3& p : points) p = {uni(rng), uni(rng), uni(rng)};
  const KdTree3 tree{std::vector<Vec3>(points)};
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.knn(points[i++ % points.size()], 16));
  }
}
BENCHMARK(BM_KdTreeKnn)->Arg(1000)->Arg(20000);

}  // namespace
