#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridpull/field.hpp"
#include "gridpull/grid.hpp"
#include "gridpull/spatial_index.hpp"

namespace gridpull {

struct QueryBatch {
  std::vector<Vec3> queries;
  std::vector<std::int64_t> nn_ids;

  std::size_t count() const { return queries.size(); }
};

// Derives an independent 64-bit stream seed from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Draws n queries: a uniformly chosen surface point plus isotropic Gaussian
// noise with standard deviation 2 * mean cell size. Draws landing outside the
// bbox or outside band_m1 are rejected and redrawn. Throws SamplingFailure
// when fewer than 1% of draws are accepted over a window.
QueryBatch sample_queries(std::span<const Vec3> points, const SurfaceIndex& index, const Grid& grid,
                          const CellMask& band_m1, std::size_t n, std::uint64_t rng_seed);

// n points drawn uniformly with replacement from the cloud.
std::vector<Vec3> sample_surface_batch(std::span<const Vec3> points, std::size_t n,
                                       std::uint64_t rng_seed);

}  // namespace gridpull
