#include "gridpull/sampler.hpp"

#include <random>

#include "gridpull/errors.hpp"

namespace gridpull {

namespace {

constexpr std::size_t kRejectionWindow = 10000;
constexpr double kMinAcceptance = 0.01;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 1));
}

QueryBatch sample_queries(std::span<const Vec3> points, const SurfaceIndex& index, const Grid& grid,
                          const CellMask& band_m1, std::size_t n, std::uint64_t rng_seed) {
  if (n == 0) throw InvalidInput("query count must be positive");
  if (points.empty()) throw InvalidInput("cannot sample queries around an empty cloud");
  if (band_m1.size() != static_cast<std::size_t>(grid.cell_count())) {
    throw InvalidInput("band mask does not match the grid");
  }

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::normal_distribution<double> noise(0.0, 2.0 * grid.mean_cell_size());

  QueryBatch batch;
  batch.queries.reserve(n);
  std::vector<std::int64_t> sources;
  sources.reserve(n);
  std::size_t window_draws = 0;
  std::size_t window_accepted = 0;
  while (batch.queries.size() < n) {
    const std::size_t source = pick(rng);
    const double dx = noise(rng);
    const double dy = noise(rng);
    const double dz = noise(rng);
    const Vec3 q = points[source] + Vec3{dx, dy, dz};
    ++window_draws;
    if (in_domain(grid, q) && band_m1[grid.cell_id(locate_cell(grid, q))]) {
      batch.queries.push_back(q);
      sources.push_back(static_cast<std::int64_t>(source));
      ++window_accepted;
    }
    if (window_draws == kRejectionWindow) {
      if (static_cast<double>(window_accepted) < kMinAcceptance * static_cast<double>(window_draws)) {
        throw SamplingFailure("query sampling rejected more than 99% of draws; the M1 band is too narrow");
      }
      window_draws = 0;
      window_accepted = 0;
    }
  }

  // The source point bounds the search radius; the result is still exact.
  batch.nn_ids.resize(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    batch.nn_ids[i] = index.nearest(batch.queries[i], sources[i]).point_id;
  }
  return batch;
}

std::vector<Vec3> sample_surface_batch(std::span<const Vec3> points, std::size_t n,
                                       std::uint64_t rng_seed) {
  if (points.empty()) throw InvalidInput("cannot sample an empty cloud");
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::vector<Vec3> out(n);
  for (auto& p : out) p = points[pick(rng)];
  return out;
}

}  // namespace gridpull
