#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gridpull/field.hpp"
#include "gridpull/mesh.hpp"

namespace gridpull {

struct ExtractResult {
  Mesh mesh;
  // Set when nothing was extracted (all cells skipped or no sign change).
  bool empty_warning = false;
  std::int64_t processed_cells = 0;
  std::int64_t skipped_cells = 0;
};

// Triangulation of one marching-cubes case, as triples of cube edge ids.
// Corner c sits at offset (c&1, (c>>1)&1, (c>>2)&1); a corner is "inside"
// (bit set in the case index) when its value is negative. Edge e joins the
// corners differing along axis e/4. Triangles wind counter-clockwise when
// seen from the positive side.
const std::vector<std::array<int, 3>>& marching_cubes_case(int case_index);

// Cube edge e as its (lower, upper) corner pair.
std::array<int, 2> marching_cubes_edge(int e);

// Zero iso-surface of the field. Cells are processed only when all eight
// lattice vertices are optimized. For mc_resolution != R the field is
// resampled by trilinear interpolation; a lattice vertex then counts as
// optimized when every vertex of its interpolation cell is. Output vertices
// are mapped back through the inverse transform.
ExtractResult marching_cubes(const DistanceField& field, const NormalizeTransform& transform,
                             int mc_resolution);

// Default extraction resolution, min(R, 256).
inline int default_mc_resolution(int resolution) { return resolution < 256 ? resolution : 256; }

}  // namespace gridpull
