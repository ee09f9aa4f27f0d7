#include "gridpull/field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "gridpull/errors.hpp"

namespace gridpull {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

NormalizedCloud normalize_cloud(std::span<const Vec3> points, double padding) {
  if (points.empty()) throw InvalidInput("cannot normalize an empty point cloud");
  if (!(padding >= 0.0 && padding < 0.5)) throw InvalidInput("padding must lie in [0, 0.5)");
  Vec3 lo = points.front();
  Vec3 hi = lo;
  for (const Vec3& p : points) {
    if (!is_finite(p)) throw InvalidInput("point cloud has a non-finite coordinate");
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(extent > 0.0)) throw InvalidInput("point cloud has zero extent");

  NormalizedCloud out;
  out.transform.scale = (1.0 - 2.0 * padding) / extent;
  const Vec3 center = (lo + hi) * 0.5;
  out.transform.offset = Vec3{0.5, 0.5, 0.5} - center * out.transform.scale;
  out.points.reserve(points.size());
  for (const Vec3& p : points) out.points.push_back(out.transform.apply(p));
  out.bbox_min = {0.0, 0.0, 0.0};
  out.bbox_max = {1.0, 1.0, 1.0};
  return out;
}

void DistanceField::index_parameters() {
  parameter_vertices.clear();
  parameter_of_vertex.assign(optimized_mask.size(), -1);
  for (std::size_t v = 0; v < optimized_mask.size(); ++v) {
    if (optimized_mask[v]) {
      parameter_of_vertex[v] = static_cast<std::int32_t>(parameter_vertices.size());
      parameter_vertices.push_back(static_cast<std::int64_t>(v));
    }
  }
}

std::vector<double> init_sphere(const Grid& grid, const Vec3& center, double radius_cells) {
  if (!(radius_cells > 0.0)) throw InvalidInput("sphere radius must be positive");
  if (!in_domain(grid, center)) throw InvalidInput("sphere center lies outside the grid");
  const double radius = radius_cells * grid.mean_cell_size();
  const int n = grid.vertices_per_axis();
  std::vector<double> values(static_cast<std::size_t>(grid.vertex_count()));
  std::size_t id = 0;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        values[id++] = distance(grid.vertex_position(i, j, k), center) - radius;
      }
    }
  }
  return values;
}

CellMask compute_band(const Grid& grid, std::span<const Vec3> points, int m) {
  if (m < 0) throw InvalidInput("band width must be non-negative");
  const int r = grid.resolution();
  CellMask mask(static_cast<std::size_t>(grid.cell_count()), 0);
  for (const Vec3& p : points) mask[grid.cell_id(locate_cell(grid, p))] = 1;
  if (m == 0) return mask;

  // Chebyshev dilation is separable: a 1-D max filter of radius m per axis.
  const std::int64_t stride[3] = {1, r, static_cast<std::int64_t>(r) * r};
  CellMask scratch(mask.size());
  std::vector<int> last_set(r);
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t s = stride[axis];
    const int o1 = (axis + 1) % 3;
    const int o2 = (axis + 2) % 3;
    for (int b = 0; b < r; ++b) {
      for (int a = 0; a < r; ++a) {
        const std::int64_t base = a * stride[o1] + b * stride[o2];
        // Distance-to-nearest-set along the line, two sweeps.
        int prev = std::numeric_limits<int>::min() / 2;
        for (int t = 0; t < r; ++t) {
          if (mask[base + t * s]) prev = t;
          last_set[t] = t - prev;
        }
        int next = std::numeric_limits<int>::max() / 2;
        for (int t = r - 1; t >= 0; --t) {
          if (mask[base + t * s]) next = t;
          scratch[base + t * s] = std::min(last_set[t], next - t) <= m ? 1 : 0;
        }
      }
    }
    mask.swap(scratch);
  }
  return mask;
}

VertexMask cell_mask_vertices(const Grid& grid, const CellMask& cells) {
  VertexMask out(static_cast<std::size_t>(grid.vertex_count()), 0);
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    if (!cells[c]) continue;
    for (std::int64_t v : grid.cell_corners(grid.cell_coords(c))) out[v] = 1;
  }
  return out;
}

CellMask enclosed_cells(const Grid& grid, std::span<const Vec3> points) {
  const int r = grid.resolution();
  const CellMask wall = compute_band(grid, points, 1);
  CellMask reached(wall.size(), 0);
  std::vector<std::int64_t> stack;
  auto push = [&](int i, int j, int k) {
    const std::int64_t c = grid.cell_id({i, j, k});
    if (wall[c] || reached[c]) return;
    reached[c] = 1;
    stack.push_back(c);
  };
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b < r; ++b) {
      push(0, a, b);
      push(r - 1, a, b);
      push(a, 0, b);
      push(a, r - 1, b);
      push(a, b, 0);
      push(a, b, r - 1);
    }
  }
  while (!stack.empty()) {
    const CellIndex c = grid.cell_coords(stack.back());
    stack.pop_back();
    if (c.i > 0) push(c.i - 1, c.j, c.k);
    if (c.i + 1 < r) push(c.i + 1, c.j, c.k);
    if (c.j > 0) push(c.i, c.j - 1, c.k);
    if (c.j + 1 < r) push(c.i, c.j + 1, c.k);
    if (c.k > 0) push(c.i, c.j, c.k - 1);
    if (c.k + 1 < r) push(c.i, c.j, c.k + 1);
  }
  CellMask out(wall.size(), 0);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = !wall[c] && !reached[c];
  return out;
}

void orient_enclosed(DistanceField& field, std::span<const Vec3> points) {
  const VertexMask inside = cell_mask_vertices(field.grid, enclosed_cells(field.grid, points));
  for (std::size_t v = 0; v < inside.size(); ++v) {
    if (inside[v]) field.values[v] = -std::abs(field.values[v]);
  }
}

DistanceField make_field(const Grid& grid, std::span<const Vec3> points, int m1, int m2,
                         const Vec3& sphere_center, double sphere_radius_cells) {
  DistanceField field;
  field.grid = grid;
  field.values = init_sphere(grid, sphere_center, sphere_radius_cells);
  field.cell_band_m1 = compute_band(grid, points, m1);
  field.cell_band_m2 = compute_band(grid, points, m2);
  field.vertex_band_m2 = cell_mask_vertices(grid, field.cell_band_m2);
  field.optimized_mask = cell_mask_vertices(grid, field.cell_band_m1);
  for (std::size_t v = 0; v < field.optimized_mask.size(); ++v) {
    field.optimized_mask[v] |= field.vertex_band_m2[v];
  }
  field.index_parameters();
  return field;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[4] = {'G', 'P', 'D', 'F'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_bits(std::ostream& os, const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> packed((mask.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) packed[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
  os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

class Reader {
 public:
  Reader(std::istream& is, const std::filesystem::path& path) : is_(is), path_(path.string()) {}

  template <typename T>
  T get(const char* what) {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof(T), what);
    return v;
  }

  std::vector<std::uint8_t> get_bits(std::size_t count, const char* what) {
    std::vector<std::uint8_t> packed((count + 7) / 8);
    read(reinterpret_cast<char*>(packed.data()), packed.size(), what);
    std::vector<std::uint8_t> mask(count);
    for (std::size_t i = 0; i < count; ++i) mask[i] = (packed[i >> 3] >> (i & 7)) & 1u;
    return mask;
  }

  void read(char* dst, std::size_t n, const char* what) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw FormatError(path_ + ": truncated checkpoint while reading " + what + " at offset " +
                        std::to_string(offset_));
    }
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const DistanceField& field, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const Grid& g = field.grid;
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.resolution()));
  for (int a = 0; a < 3; ++a) put<double>(os, g.bbox_min()[a]);
  for (int a = 0; a < 3; ++a) put<double>(os, g.bbox_max()[a]);
  put_bits(os, field.cell_band_m1);
  put_bits(os, field.cell_band_m2);
  put_bits(os, field.optimized_mask);
  std::uint64_t count = 0;
  for (auto m : field.optimized_mask) count += m ? 1 : 0;
  put<std::uint64_t>(os, count);
  for (std::size_t v = 0; v < field.optimized_mask.size(); ++v) {
    if (!field.optimized_mask[v]) continue;
    put<std::uint64_t>(os, v);
    put<float>(os, static_cast<float>(field.values[v]));
  }
  os.flush();
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

DistanceField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  Reader in(is, path);
  char magic[4];
  in.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": bad checkpoint magic");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto r = in.get<std::uint32_t>("resolution");
  if (r < 2 || r > 4096) throw FormatError(path.string() + ": implausible resolution " + std::to_string(r));
  Vec3 lo;
  Vec3 hi;
  for (int a = 0; a < 3; ++a) lo[a] = in.get<double>("bbox");
  for (int a = 0; a < 3; ++a) hi[a] = in.get<double>("bbox");

  DistanceField field;
  try {
    field.grid = build_grid(lo, hi, static_cast<int>(r));
  } catch (const InvalidInput& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const auto cells = static_cast<std::size_t>(field.grid.cell_count());
  const auto verts = static_cast<std::size_t>(field.grid.vertex_count());
  field.cell_band_m1 = in.get_bits(cells, "m1 band");
  field.cell_band_m2 = in.get_bits(cells, "m2 band");
  field.optimized_mask = in.get_bits(verts, "optimized mask");
  field.vertex_band_m2 = cell_mask_vertices(field.grid, field.cell_band_m2);
  field.values.assign(verts, kUnstoredValue);

  const auto count = in.get<std::uint64_t>("value count");
  if (count > verts) throw FormatError(path.string() + ": value count exceeds vertex count");
  for (std::uint64_t n = 0; n < count; ++n) {
    const auto v = in.get<std::uint64_t>("vertex index");
    const auto value = in.get<float>("vertex value");
    if (v >= verts || !field.optimized_mask[v]) {
      throw FormatError(path.string() + ": vertex index " + std::to_string(v) +
                        " is not an optimized vertex (offset " + std::to_string(in.offset()) + ")");
    }
    field.values[v] = value;
  }
  field.index_parameters();
  if (field.parameter_count() != count) {
    throw FormatError(path.string() + ": value count does not match the optimized mask");
  }
  return field;
}

}  // namespace gridpull
