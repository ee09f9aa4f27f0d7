#include "gridpull/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridpull/errors.hpp"

namespace gridpull {

namespace {

constexpr double kClampTolerance = 1e-9;

struct LocalCoords {
  CellIndex cell;
  Vec3 uvw;
};

LocalCoords locate(const Grid& grid, const Vec3& p) {
  const int r = grid.resolution();
  LocalCoords out;
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    const double lo = grid.bbox_min()[a];
    const double hi = grid.bbox_max()[a];
    const double h = grid.cell_size()[a];
    double x = p[a];
    if (!(x >= lo - kClampTolerance * h && x <= hi + kClampTolerance * h)) {
      throw OutOfDomain("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " +
                        std::to_string(p.z) + ") lies outside the grid domain");
    }
    x = std::clamp(x, lo, hi);
    const double t = (x - lo) / h;
    const int cell = std::clamp(static_cast<int>(std::floor(t)), 0, r - 1);
    idx[a] = cell;
    out.uvw[a] = std::clamp(t - cell, 0.0, 1.0);
  }
  out.cell = {idx[0], idx[1], idx[2]};
  return out;
}

}  // namespace

std::array<std::int64_t, 8> Grid::cell_corners(const CellIndex& c) const {
  std::array<std::int64_t, 8> ids{};
  const std::int64_t base = vertex_id(c.i, c.j, c.k);
  const std::int64_t n = resolution_ + 1;
  for (int corner = 0; corner < 8; ++corner) {
    ids[corner] = base + (corner & 1) + ((corner >> 1) & 1) * n + ((corner >> 2) & 1) * n * n;
  }
  return ids;
}

Grid build_grid(const Vec3& bbox_min, const Vec3& bbox_max, int resolution) {
  if (resolution < 2) throw InvalidInput("grid resolution must be at least 2");
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(bbox_min[a]) || !std::isfinite(bbox_max[a])) {
      throw InvalidInput("grid bounding box must be finite");
    }
    if (!(bbox_max[a] - bbox_min[a] > 0.0)) {
      throw InvalidInput("grid bounding box has a degenerate axis " + std::to_string(a));
    }
  }
  Grid g;
  g.resolution_ = resolution;
  g.bbox_min_ = bbox_min;
  g.bbox_max_ = bbox_max;
  g.cell_size_ = (bbox_max - bbox_min) / static_cast<double>(resolution);
  return g;
}

CellIndex locate_cell(const Grid& grid, const Vec3& p) { return locate(grid, p).cell; }

bool in_domain(const Grid& grid, const Vec3& p) {
  for (int a = 0; a < 3; ++a) {
    const double tol = kClampTolerance * grid.cell_size()[a];
    if (!(p[a] >= grid.bbox_min()[a] - tol && p[a] <= grid.bbox_max()[a] + tol)) return false;
  }
  return true;
}

CellStencil cell_stencil(const Grid& grid, const Vec3& p) {
  const LocalCoords lc = locate(grid, p);
  CellStencil s;
  s.cell = lc.cell;
  s.vertex_ids = grid.cell_corners(lc.cell);
  const double u[3] = {lc.uvw.x, lc.uvw.y, lc.uvw.z};
  const Vec3 inv_h{1.0 / grid.cell_size().x, 1.0 / grid.cell_size().y, 1.0 / grid.cell_size().z};
  for (int c = 0; c < 8; ++c) {
    double basis[3];
    double slope[3];
    for (int a = 0; a < 3; ++a) {
      const bool upper = (c >> a) & 1;
      basis[a] = upper ? u[a] : 1.0 - u[a];
      slope[a] = upper ? 1.0 : -1.0;
    }
    s.weights[c] = basis[0] * basis[1] * basis[2];
    s.gradient_weights[c] = {slope[0] * basis[1] * basis[2] * inv_h.x,
                             basis[0] * slope[1] * basis[2] * inv_h.y,
                             basis[0] * basis[1] * slope[2] * inv_h.z};
  }
  return s;
}

InterpolationStencil stencil(const Grid& grid, const Vec3& p) {
  const CellStencil cs = cell_stencil(grid, p);
  return {cs.vertex_ids, cs.weights};
}

double interpolate(const Grid& grid, std::span<const double> values, const Vec3& p) {
  if (values.size() != static_cast<std::size_t>(grid.vertex_count())) {
    throw InvalidInput("value array does not match the grid vertex count");
  }
  return cell_stencil(grid, p).value(values);
}

Vec3 interpolate_gradient(const Grid& grid, std::span<const double> values, const Vec3& p) {
  if (values.size() != static_cast<std::size_t>(grid.vertex_count())) {
    throw InvalidInput("value array does not match the grid vertex count");
  }
  return cell_stencil(grid, p).gradient(values);
}

}  // namespace gridpull
