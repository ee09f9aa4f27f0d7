#include <random>

#include <benchmark/benchmark.h>

#include "gridpull/field.hpp"
#include "gridpull/loss.hpp"
#include "gridpull/mesh_extract.hpp"
#include "gridpull/sampler.hpp"
#include "gridpull/spatial_index.hpp"
#include "gridpull/synth.hpp"

using namespace gridpull;

namespace {

std::vector<Vec3> sphere_cloud(std::size_t n) {
  auto shape = synth_shape(ShapeKind::Sphere, {}, n, 0.0, 1);
  return normalize_cloud(shape.cloud.points, 0.05).points;
}

std::vector<Vec3> uniform_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out(n);
  for (Vec3& p : out) p = {u(rng), u(rng), u(rng)};
  return out;
}

DistanceField sphere_field(int r, const std::vector<Vec3>& cloud) {
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, r);
  DistanceField f = make_field(g, cloud, 3, 14, {0.5, 0.5, 0.5}, 2.0);
  for (std::int64_t v = 0; v < g.vertex_count(); ++v) f.values[v] = distance(g.vertex_position(v), {0.5, 0.5, 0.5}) - 0.45;
  return f;
}

}  // namespace

static void BM_IndexBuild(benchmark::State& state) {
  const auto cloud = sphere_cloud(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_index(cloud));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexBuild)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_Nearest(benchmark::State& state) {
  const auto cloud = sphere_cloud(static_cast<std::size_t>(state.range(0)));
  const SurfaceIndex index = build_index(cloud);
  const auto queries = uniform_points(4096, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.nearest(queries[i++ & 4095]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Nearest)->Arg(10000)->Arg(100000);

static void BM_Interpolate(benchmark::State& state) {
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, 64);
  std::vector<double> values(static_cast<std::size_t>(g.vertex_count()), 0.25);
  const auto queries = uniform_points(4096, 3);
  std::size_t i = 0;
  for (auto _ : state) {
    const CellStencil s = cell_stencil(g, queries[i++ & 4095]);
    benchmark::DoNotOptimize(s.value(values));
    benchmark::DoNotOptimize(s.gradient(values));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Interpolate);

static void BM_TotalLoss(benchmark::State& state) {
  const auto cloud = sphere_cloud(100000);
  const DistanceField f = sphere_field(64, cloud);
  const SurfaceIndex index = build_index(cloud);
  const auto batch = sample_queries(cloud, index, f.grid, f.cell_band_m1, static_cast<std::size_t>(state.range(0)), 5);
  const auto surface = sample_surface_batch(cloud, static_cast<std::size_t>(state.range(0)), 6);
  LossOptions opts;
  opts.deterministic = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(f, batch, cloud, surface, {}, opts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TotalLoss)->Args({50000, 1})->Args({50000, 0})->Unit(benchmark::kMillisecond);

static void BM_SampleQueries(benchmark::State& state) {
  const auto cloud = sphere_cloud(100000);
  const DistanceField f = sphere_field(64, cloud);
  const SurfaceIndex index = build_index(cloud);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_queries(cloud, index, f.grid, f.cell_band_m1, 50000, seed++));
  state.SetItemsProcessed(state.iterations() * 50000);
}
BENCHMARK(BM_SampleQueries)->Unit(benchmark::kMillisecond);

static void BM_MarchingCubes(benchmark::State& state) {
  const auto cloud = sphere_cloud(100000);
  const DistanceField f = sphere_field(static_cast<int>(state.range(0)), cloud);
  for (auto _ : state) benchmark::DoNotOptimize(marching_cubes(f, {}, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_MarchingCubes)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
