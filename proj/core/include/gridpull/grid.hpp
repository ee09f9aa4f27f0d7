#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "gridpull/vec3.hpp"

namespace gridpull {

struct CellIndex {
  int i = 0;
  int j = 0;
  int k = 0;
  friend constexpr bool operator==(const CellIndex&, const CellIndex&) = default;
};

// Axis-aligned uniform lattice with R cells per axis and (R+1)^3 vertices.
// Vertex (i,j,k) has flat index i + j*(R+1) + k*(R+1)^2; cells use the same
// x-fastest order with stride R.
class Grid {
 public:
  Grid() = default;

  int resolution() const { return resolution_; }
  const Vec3& bbox_min() const { return bbox_min_; }
  const Vec3& bbox_max() const { return bbox_max_; }
  const Vec3& cell_size() const { return cell_size_; }
  double mean_cell_size() const { return (cell_size_.x + cell_size_.y + cell_size_.z) / 3.0; }

  int vertices_per_axis() const { return resolution_ + 1; }
  std::int64_t vertex_count() const {
    const std::int64_t n = resolution_ + 1;
    return n * n * n;
  }
  std::int64_t cell_count() const {
    const std::int64_t n = resolution_;
    return n * n * n;
  }

  std::int64_t vertex_id(int i, int j, int k) const {
    const std::int64_t n = resolution_ + 1;
    return i + n * (j + n * static_cast<std::int64_t>(k));
  }
  std::array<int, 3> vertex_coords(std::int64_t id) const {
    const std::int64_t n = resolution_ + 1;
    return {static_cast<int>(id % n), static_cast<int>((id / n) % n), static_cast<int>(id / (n * n))};
  }
  Vec3 vertex_position(int i, int j, int k) const {
    return {bbox_min_.x + i * cell_size_.x, bbox_min_.y + j * cell_size_.y,
            bbox_min_.z + k * cell_size_.z};
  }
  Vec3 vertex_position(std::int64_t id) const {
    const auto c = vertex_coords(id);
    return vertex_position(c[0], c[1], c[2]);
  }

  std::int64_t cell_id(const CellIndex& c) const {
    const std::int64_t n = resolution_;
    return c.i + n * (c.j + n * static_cast<std::int64_t>(c.k));
  }
  CellIndex cell_coords(std::int64_t id) const {
    const std::int64_t n = resolution_;
    return {static_cast<int>(id % n), static_cast<int>((id / n) % n), static_cast<int>(id / (n * n))};
  }
  // Flat vertex ids of the 8 cell corners; corner c has offset (c&1, (c>>1)&1, (c>>2)&1).
  std::array<std::int64_t, 8> cell_corners(const CellIndex& c) const;

  friend Grid build_grid(const Vec3& bbox_min, const Vec3& bbox_max, int resolution);
  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int resolution_ = 0;
  Vec3 bbox_min_;
  Vec3 bbox_max_;
  Vec3 cell_size_;
};

// Throws InvalidInput for R < 2 or a bbox with a non-positive extent.
Grid build_grid(const Vec3& bbox_min, const Vec3& bbox_max, int resolution);

// Cell containing p. A point lying on a face shared by two cells belongs to
// the cell for which that face is the lower face; points on bbox_max clamp to
// R-1. Points within 1e-9 cell of the bbox are clamped, further out throws
// OutOfDomain.
CellIndex locate_cell(const Grid& grid, const Vec3& p);

// Whether p is inside the bbox up to the clamping tolerance.
bool in_domain(const Grid& grid, const Vec3& p);

struct InterpolationStencil {
  std::array<std::int64_t, 8> vertex_ids{};
  std::array<double, 8> weights{};
};

// Stencil plus the spatial derivatives of each basis weight, so both f(p) and
// grad f(p) are linear forms over the same 8 vertex values.
struct CellStencil {
  CellIndex cell;
  std::array<std::int64_t, 8> vertex_ids{};
  std::array<double, 8> weights{};
  std::array<Vec3, 8> gradient_weights{};

  double value(std::span<const double> values) const {
    double f = 0.0;
    for (int c = 0; c < 8; ++c) f += weights[c] * values[vertex_ids[c]];
    return f;
  }
  Vec3 gradient(std::span<const double> values) const {
    Vec3 g;
    for (int c = 0; c < 8; ++c) g += gradient_weights[c] * values[vertex_ids[c]];
    return g;
  }
};

InterpolationStencil stencil(const Grid& grid, const Vec3& p);
CellStencil cell_stencil(const Grid& grid, const Vec3& p);

// Trilinear interpolant of per-vertex values at p.
double interpolate(const Grid& grid, std::span<const double> values, const Vec3& p);

// Exact spatial gradient of the trilinear form of the cell containing p.
Vec3 interpolate_gradient(const Grid& grid, std::span<const double> values, const Vec3& p);

}  // namespace gridpull
