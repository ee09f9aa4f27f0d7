#include "gridpull/mesh_extract.hpp"

#include <algorithm>
#include <unordered_map>

#include "gridpull/errors.hpp"

namespace gridpull {

namespace {

int edge_between(int c0, int c1) {
  const int diff = c0 ^ c1;
  const int axis = diff == 1 ? 0 : (diff == 2 ? 1 : 2);
  const int lower = std::min(c0, c1);
  const int b = (axis + 1) % 3;
  const int c = (axis + 2) % 3;
  return axis * 4 + ((lower >> b) & 1) + 2 * ((lower >> c) & 1);
}

// True when cube edges a and b lie on a common cube face.
bool share_face(int a, int b) {
  int all_one = 7;
  int all_zero = 7;
  for (int e : {a, b}) {
    const int axis = e / 4;
    const int combo = e % 4;
    const int lower = ((combo & 1) << ((axis + 1) % 3)) | (((combo >> 1) & 1) << ((axis + 2) % 3));
    for (int corner : {lower, lower | (1 << axis)}) {
      all_one &= corner;
      all_zero &= ~corner;
    }
  }
  return (all_one | all_zero) != 0;
}

// Fan triangulation of a loop from the first vertex whose diagonals all
// leave the cube faces. A diagonal lying on a face would coincide with the
// neighbouring cell's triangulation and pinch the surface there.
void fan(const std::vector<int>& loop, std::vector<std::array<int, 3>>& out) {
  const std::size_t n = loop.size();
  std::size_t best = 0;
  for (std::size_t r = 0; r < n; ++r) {
    bool clean = true;
    for (std::size_t t = 2; t + 1 < n && clean; ++t) clean = !share_face(loop[r], loop[(r + t) % n]);
    if (clean) {
      best = r;
      break;
    }
  }
  for (std::size_t t = 1; t + 1 < n; ++t) out.push_back({loop[best], loop[(best + t) % n], loop[(best + t + 1) % n]});
}

// Builds all 256 cases by tracing the iso-contour over the six cube faces.
// On each face, walking its corners counter-clockwise as seen from outside
// the cube, a segment runs from a crossing entering a negative arc to the
// crossing leaving it. Ambiguous faces therefore always separate the
// negative corners, which keeps neighbouring cells consistent. Segments chain
// into closed loops that are fanned into triangles.
std::vector<std::vector<std::array<int, 3>>> build_case_table() {
  std::vector<std::vector<std::array<int, 3>>> table(256);
  for (int cube = 0; cube < 256; ++cube) {
    auto inside = [&](int corner) { return (cube >> corner) & 1; };
    std::array<int, 12> next;
    next.fill(-1);
    for (int axis = 0; axis < 3; ++axis) {
      const int b = (axis + 1) % 3;
      const int c = (axis + 2) % 3;
      for (int side = 0; side < 2; ++side) {
        std::array<int, 4> ring;
        const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        for (int r = 0; r < 4; ++r) ring[r] = (side << axis) | (uv[r][0] << b) | (uv[r][1] << c);
        if (side == 0) std::reverse(ring.begin(), ring.end());

        // Crossing edges in ring order, tagged as entering (+) or leaving (-)
        // the negative region.
        int entering[2];
        int leaving[2];
        int n_enter = 0;
        int n_leave = 0;
        int first_kind = 0;
        for (int r = 0; r < 4; ++r) {
          const int p0 = ring[r];
          const int p1 = ring[(r + 1) % 4];
          if (inside(p0) == inside(p1)) continue;
          const int e = edge_between(p0, p1);
          if (inside(p1)) {
            entering[n_enter++] = e;
            if (!first_kind) first_kind = 1;
          } else {
            leaving[n_leave++] = e;
            if (!first_kind) first_kind = -1;
          }
        }
        // Pair each entering crossing with the next leaving one in ring order.
        for (int s = 0; s < n_enter; ++s) {
          const int l = first_kind == 1 ? s : (s + 1) % n_leave;
          next[entering[s]] = leaving[l];
        }
      }
    }

    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      int e = start;
      while (!used[e]) {
        used[e] = true;
        loop.push_back(e);
        e = next[e];
      }
      fan(loop, table[cube]);
    }
  }
  return table;
}

}  // namespace

const std::vector<std::array<int, 3>>& marching_cubes_case(int case_index) {
  static const auto table = build_case_table();
  return table.at(static_cast<std::size_t>(case_index));
}

std::array<int, 2> marching_cubes_edge(int e) {
  const int axis = e / 4;
  const int combo = e % 4;
  const int b = (axis + 1) % 3;
  const int c = (axis + 2) % 3;
  const int lower = ((combo & 1) << b) | (((combo >> 1) & 1) << c);
  return {lower, lower | (1 << axis)};
}

ExtractResult marching_cubes(const DistanceField& field, const NormalizeTransform& transform,
                             int mc_resolution) {
  if (mc_resolution < 2) throw InvalidInput("marching cubes resolution must be at least 2");
  const Grid& src = field.grid;
  const bool native = mc_resolution == src.resolution();
  const Grid lattice = native ? src : build_grid(src.bbox_min(), src.bbox_max(), mc_resolution);

  // Lattice values and validity.
  std::vector<double> resampled;
  std::vector<std::uint8_t> resampled_valid;
  if (!native) {
    const auto nv = lattice.vertex_count();
    resampled.resize(nv);
    resampled_valid.resize(nv);
#pragma omp parallel for schedule(static)
    for (std::int64_t v = 0; v < nv; ++v) {
      const CellStencil s = cell_stencil(src, lattice.vertex_position(v));
      bool ok = true;
      for (std::int64_t id : s.vertex_ids) ok = ok && field.optimized_mask[id];
      resampled_valid[v] = ok ? 1 : 0;
      resampled[v] = s.value(field.values);
    }
  }
  const std::span<const double> values = native ? std::span<const double>(field.values) : resampled;
  const std::span<const std::uint8_t> valid =
      native ? std::span<const std::uint8_t>(field.optimized_mask) : resampled_valid;

  ExtractResult out;
  Mesh& mesh = out.mesh;
  // Keys: 3 * lower_vertex + axis for edge crossings, negative (-1 - vertex)
  // for crossings that land exactly on a lattice vertex.
  std::unordered_map<std::int64_t, std::int32_t> welded;
  const std::int64_t n = lattice.vertices_per_axis();
  const std::int64_t axis_stride[3] = {1, n, n * n};

  auto vertex_for_edge = [&](std::int64_t lower, int axis) -> std::int32_t {
    const std::int64_t upper = lower + axis_stride[axis];
    const double v0 = values[lower];
    const double v1 = values[upper];
    const double t = v0 / (v0 - v1);
    std::int64_t key;
    Vec3 p;
    if (v0 == 0.0) {
      key = -1 - lower;
      p = lattice.vertex_position(lower);
    } else if (v1 == 0.0) {
      key = -1 - upper;
      p = lattice.vertex_position(upper);
    } else {
      key = 3 * lower + axis;
      const Vec3 a = lattice.vertex_position(lower);
      const Vec3 b = lattice.vertex_position(upper);
      p = a + (b - a) * t;
    }
    auto [it, inserted] = welded.try_emplace(key, static_cast<std::int32_t>(mesh.vertices.size()));
    if (inserted) mesh.vertices.push_back(p);
    return it->second;
  };

  const int m = lattice.resolution();
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        const CellIndex cell{i, j, k};
        const auto corners = lattice.cell_corners(cell);
        bool ok = true;
        for (std::int64_t v : corners) ok = ok && valid[v];
        if (!ok) {
          ++out.skipped_cells;
          continue;
        }
        ++out.processed_cells;
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          if (values[corners[c]] < 0.0) cube |= 1 << c;
        }
        if (cube == 0 || cube == 255) continue;
        for (const auto& tri : marching_cubes_case(cube)) {
          std::array<std::int32_t, 3> ids;
          for (int s = 0; s < 3; ++s) {
            const auto edge = marching_cubes_edge(tri[s]);
            ids[s] = vertex_for_edge(corners[edge[0]], tri[s] / 4);
          }
          mesh.triangles.push_back(ids);
        }
      }
    }
  }

  // Drop degenerate triangles and any vertices they leave unreferenced.
  std::erase_if(mesh.triangles, [&](const std::array<std::int32_t, 3>& t) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
    const Vec3 a = mesh.vertices[t[0]];
    return squared_norm(cross(mesh.vertices[t[1]] - a, mesh.vertices[t[2]] - a)) == 0.0;
  });
  std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
  std::vector<Vec3> kept;
  kept.reserve(mesh.vertices.size());
  for (auto& t : mesh.triangles) {
    for (auto& id : t) {
      if (remap[id] < 0) {
        remap[id] = static_cast<std::int32_t>(kept.size());
        kept.push_back(transform.invert(mesh.vertices[id]));
      }
      id = remap[id];
    }
  }
  mesh.vertices = std::move(kept);
  out.empty_warning = mesh.triangles.empty();
  return out;
}

}  // namespace gridpull
