#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gridpull/grid.hpp"
#include "gridpull/vec3.hpp"

namespace gridpull {

// Uniform scale followed by translation: normalized = p * scale + offset.
struct NormalizeTransform {
  double scale = 1.0;
  Vec3 offset;

  Vec3 apply(const Vec3& p) const { return p * scale + offset; }
  Vec3 invert(const Vec3& p) const { return (p - offset) / scale; }
};

struct NormalizedCloud {
  std::vector<Vec3> points;
  NormalizeTransform transform;
  Vec3 bbox_min;
  Vec3 bbox_max;
};

// Maps the cloud's tight bounding box into the centered cube of side
// (1 - 2*padding) inside [0,1]^3, preserving aspect ratio. The returned bbox
// is the unit cube.
NormalizedCloud normalize_cloud(std::span<const Vec3> points, double padding = 0.05);

using CellMask = std::vector<std::uint8_t>;
using VertexMask = std::vector<std::uint8_t>;

// Signed distances on grid vertices (negative inside) plus the band masks
// that decide which vertices are optimized and which cells are meshed.
struct DistanceField {
  Grid grid;
  std::vector<double> values;
  CellMask cell_band_m1;
  CellMask cell_band_m2;
  VertexMask vertex_band_m2;
  VertexMask optimized_mask;

  // Sorted ids of optimized vertices and the inverse map (-1 when frozen).
  // Rebuilt by index_parameters().
  std::vector<std::int64_t> parameter_vertices;
  std::vector<std::int32_t> parameter_of_vertex;

  std::size_t parameter_count() const { return parameter_vertices.size(); }
  bool is_optimized(std::int64_t vertex) const { return optimized_mask[vertex] != 0; }

  void index_parameters();
};

// d_i = |v_i - center| - radius_cells * mean cell size.
std::vector<double> init_sphere(const Grid& grid, const Vec3& center, double radius_cells);

// Cells within Chebyshev index distance <= m of any cell holding a point.
CellMask compute_band(const Grid& grid, std::span<const Vec3> points, int m);

// Cells not reachable from the grid boundary through face-adjacent cells
// that avoid the one-cell dilation of the occupied cells.
CellMask enclosed_cells(const Grid& grid, std::span<const Vec3> points);

// Vertices incident to at least one masked cell.
VertexMask cell_mask_vertices(const Grid& grid, const CellMask& cells);

// Assembles a field: bands m1/m2 from the points, sphere initialization, and
// optimized_mask = vertices of m1 cells union vertices of m2 cells.
DistanceField make_field(const Grid& grid, std::span<const Vec3> points, int m1, int m2,
                         const Vec3& sphere_center, double sphere_radius_cells);

// Makes every vertex of an enclosed cell negative (d = -|d|), so a small
// interior sphere does not leave the rest of the interior positive. Open
// clouds enclose nothing and are left unchanged.
void orient_enclosed(DistanceField& field, std::span<const Vec3> points);

// Binary little-endian checkpoint ("GPDF"); only optimized vertex values are
// stored, as 32-bit floats. Frozen vertices load as kUnstoredValue.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr double kUnstoredValue = 1.0;

void save_checkpoint(const DistanceField& field, const std::filesystem::path& path);
DistanceField load_checkpoint(const std::filesystem::path& path);

}  // namespace gridpull
