#include "gridpull/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "gridpull/errors.hpp"

namespace gridpull {

static_assert(std::endian::native == std::endian::little, "binary PLY I/O assumes a little-endian host");

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  // from_chars rejects an explicit plus sign, which other writers emit.
  if (s.size() > 1 && s.front() == '+' && s[1] != '-' && s[1] != '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw FormatError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_input(const std::filesystem::path& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary) {
  std::ofstream os(path, binary ? (std::ios::binary | std::ios::trunc) : std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw IoError("failed writing " + path.string());
}

Vec3 unit_normal(const Vec3& n, const std::filesystem::path& path, std::size_t where) {
  const double len = norm(n);
  if (!(len > 0.0)) fail_line(path, where, "zero-length normal");
  return n / len;
}

// ---------------------------------------------------------------------------
// XYZ

PointCloud read_xyz(const std::filesystem::path& path) {
  auto is = open_input(path, false);
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  int columns = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok.front().starts_with('#')) continue;
    if (tok.size() != 3 && tok.size() != 6) {
      fail_line(path, line_no, "expected 3 or 6 values, found " + std::to_string(tok.size()));
    }
    if (columns == 0) columns = static_cast<int>(tok.size());
    if (static_cast<int>(tok.size()) != columns) fail_line(path, line_no, "inconsistent column count");
    double v[6];
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (!parse_double(tok[i], v[i])) fail_line(path, line_no, "invalid number '" + std::string(tok[i]) + "'");
    }
    cloud.points.push_back({v[0], v[1], v[2]});
    if (columns == 6) cloud.normals.push_back(unit_normal({v[3], v[4], v[5]}, path, line_no));
  }
  if (cloud.points.empty()) throw FormatError(path.string() + ": no points");
  return cloud;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  auto os = open_output(path, false);
  char buf[256];
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    int len;
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i];
      len = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n", p.x, p.y, p.z, n.x, n.y, n.z);
    } else {
      len = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    }
    os.write(buf, len);
  }
  finish(os, path);
}

// ---------------------------------------------------------------------------
// OBJ

struct ObjData {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<std::array<std::int32_t, 3>> triangles;
};

ObjData read_obj(const std::filesystem::path& path) {
  auto is = open_input(path, false);
  ObjData obj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok.front().starts_with('#')) continue;
    if (tok[0] == "v" || tok[0] == "vn") {
      // Allow an optional w / colour tail after x y z.
      if (tok.size() < 4) fail_line(path, line_no, "vertex line needs 3 coordinates");
      double v[3];
      for (int i = 0; i < 3; ++i) {
        if (!parse_double(tok[1 + i], v[i])) fail_line(path, line_no, "invalid number '" + std::string(tok[1 + i]) + "'");
      }
      (tok[0] == "v" ? obj.vertices : obj.normals).push_back({v[0], v[1], v[2]});
    } else if (tok[0] == "f") {
      if (tok.size() < 4) fail_line(path, line_no, "face needs at least 3 vertices");
      std::vector<std::int32_t> ids;
      for (std::size_t i = 1; i < tok.size(); ++i) {
        std::string_view ref = tok[i].substr(0, tok[i].find('/'));
        std::int64_t idx = 0;
        if (!parse_int(ref, idx) || idx == 0) fail_line(path, line_no, "invalid face index '" + std::string(tok[i]) + "'");
        if (idx < 0) idx += static_cast<std::int64_t>(obj.vertices.size()) + 1;
        if (idx < 1 || idx > static_cast<std::int64_t>(obj.vertices.size())) {
          fail_line(path, line_no, "face index out of range");
        }
        ids.push_back(static_cast<std::int32_t>(idx - 1));
      }
      for (std::size_t i = 1; i + 1 < ids.size(); ++i) obj.triangles.push_back({ids[0], ids[i], ids[i + 1]});
    }
  }
  return obj;
}

void write_obj(const std::filesystem::path& path, const std::vector<Vec3>& vertices,
               const std::vector<std::array<std::int32_t, 3>>& triangles) {
  auto os = open_output(path, false);
  char buf[256];
  for (const Vec3& p : vertices) {
    const int len = std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", p.x, p.y, p.z);
    os.write(buf, len);
  }
  for (const auto& t : triangles) {
    const int len = std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    os.write(buf, len);
  }
  finish(os, path);
}

// ---------------------------------------------------------------------------
// PLY

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

bool scalar_from_name(std::string_view name, ScalarType& out) {
  static const std::pair<std::string_view, ScalarType> names[] = {
      {"char", ScalarType::Int8},     {"int8", ScalarType::Int8},      {"uchar", ScalarType::UInt8},
      {"uint8", ScalarType::UInt8},   {"short", ScalarType::Int16},    {"int16", ScalarType::Int16},
      {"ushort", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},  {"int", ScalarType::Int32},
      {"int32", ScalarType::Int32},   {"uint", ScalarType::UInt32},    {"uint32", ScalarType::UInt32},
      {"float", ScalarType::Float32}, {"float32", ScalarType::Float32}, {"double", ScalarType::Float64},
      {"float64", ScalarType::Float64}};
  for (const auto& [n, t] : names) {
    if (n == name) {
      out = t;
      return true;
    }
  }
  return false;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8:
      return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16:
      return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32:
      return 4;
    case ScalarType::Float64:
      return 8;
  }
  return 0;
}

double decode_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::Int8: return static_cast<std::int8_t>(*p);
    case ScalarType::UInt8: return static_cast<std::uint8_t>(*p);
    case ScalarType::Int16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::UInt16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::Int32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::UInt32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::Float32: { float v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::Float64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;

  int find(std::string_view prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
      if (properties[i].name == prop && !properties[i].is_list) return static_cast<int>(i);
    }
    return -1;
  }
};

struct PlyData {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<std::array<std::int32_t, 3>> triangles;
};

// Reads one element's rows, invoking on_row(scalar values, list values).
class PlySource {
 public:
  PlySource(std::istream& is, const std::filesystem::path& path, bool binary, std::size_t line)
      : is_(is), path_(path), binary_(binary), line_(line) {}

  void read_row(const PlyElement& el, std::vector<double>& scalars, std::vector<std::vector<double>>& lists) {
    scalars.assign(el.properties.size(), 0.0);
    lists.assign(el.properties.size(), {});
    if (binary_) {
      for (std::size_t i = 0; i < el.properties.size(); ++i) {
        const auto& p = el.properties[i];
        if (p.is_list) {
          const double n = read_binary(p.count_type);
          if (n < 0 || n > 1e6) fail("implausible list length");
          lists[i].resize(static_cast<std::size_t>(n));
          for (auto& v : lists[i]) v = read_binary(p.type);
        } else {
          scalars[i] = read_binary(p.type);
        }
      }
      return;
    }
    std::string text;
    std::vector<std::string_view> tok;
    do {
      if (!std::getline(is_, text)) fail("unexpected end of file in element '" + el.name + "'");
      ++line_;
      tok = split_ws(text);
    } while (tok.empty());
    std::size_t t = 0;
    auto next = [&]() {
      if (t >= tok.size()) fail("too few values in element '" + el.name + "'");
      double v;
      if (!parse_double(tok[t], v)) fail("invalid number '" + std::string(tok[t]) + "'");
      ++t;
      return v;
    };
    for (std::size_t i = 0; i < el.properties.size(); ++i) {
      if (el.properties[i].is_list) {
        const double n = next();
        if (n < 0 || n > 1e6 || n != std::floor(n)) fail("invalid list length");
        lists[i].resize(static_cast<std::size_t>(n));
        for (auto& v : lists[i]) v = next();
      } else {
        scalars[i] = next();
      }
    }
    if (t != tok.size()) fail("too many values in element '" + el.name + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    if (binary_) throw FormatError(path_.string() + ": byte offset " + std::to_string(offset()) + ": " + msg);
    fail_line(path_, line_, msg);
  }

 private:
  double read_binary(ScalarType t) {
    char buf[8];
    const std::size_t n = scalar_size(t);
    is_.read(buf, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) fail("truncated binary data");
    const double v = decode_scalar(t, buf);
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }

  std::size_t offset() const {
    auto pos = is_.tellg();
    return pos < 0 ? 0 : static_cast<std::size_t>(pos);
  }

  std::istream& is_;
  const std::filesystem::path& path_;
  bool binary_;
  std::size_t line_;
};

PlyData read_ply(const std::filesystem::path& path) {
  auto is = open_input(path, true);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() {
    if (!std::getline(is, line)) fail_line(path, line_no, "unexpected end of header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next_line();
  if (line != "ply") fail_line(path, line_no, "missing 'ply' magic");
  bool binary = false;
  bool have_format = false;
  std::vector<PlyElement> elements;
  for (;;) {
    next_line();
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3) fail_line(path, line_no, "malformed format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        fail_line(path, line_no, "unsupported PLY format '" + std::string(tok[1]) + "'");
      }
      have_format = true;
    } else if (tok[0] == "element") {
      std::size_t count = 0;
      if (tok.size() != 3 || !parse_int(tok[2], count)) fail_line(path, line_no, "malformed element line");
      elements.push_back({std::string(tok[1]), count, {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) fail_line(path, line_no, "property before any element");
      PlyProperty prop;
      if (tok.size() == 3) {
        if (!scalar_from_name(tok[1], prop.type)) fail_line(path, line_no, "unknown property type");
        prop.name = tok[2];
      } else if (tok.size() == 5 && tok[1] == "list") {
        prop.is_list = true;
        if (!scalar_from_name(tok[2], prop.count_type) || !scalar_from_name(tok[3], prop.type)) {
          fail_line(path, line_no, "unknown list property type");
        }
        prop.name = tok[4];
      } else {
        fail_line(path, line_no, "malformed property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      fail_line(path, line_no, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_format) fail_line(path, line_no, "missing format line");

  PlyData data;
  PlySource src(is, path, binary, line_no);
  std::vector<double> scalars;
  std::vector<std::vector<double>> lists;
  for (const PlyElement& el : elements) {
    if (el.name == "vertex") {
      const int ix = el.find("x"), iy = el.find("y"), iz = el.find("z");
      const int nx = el.find("nx"), ny = el.find("ny"), nz = el.find("nz");
      if (ix < 0 || iy < 0 || iz < 0) src.fail("vertex element lacks x/y/z");
      const bool normals = nx >= 0 && ny >= 0 && nz >= 0;
      data.vertices.reserve(el.count);
      for (std::size_t r = 0; r < el.count; ++r) {
        src.read_row(el, scalars, lists);
        data.vertices.push_back({scalars[ix], scalars[iy], scalars[iz]});
        if (normals) {
          const Vec3 n{scalars[nx], scalars[ny], scalars[nz]};
          if (!(norm(n) > 0.0)) src.fail("zero-length normal");
          data.normals.push_back(n / norm(n));
        }
      }
    } else if (el.name == "face") {
      int list = -1;
      for (std::size_t i = 0; i < el.properties.size(); ++i) {
        const auto& p = el.properties[i];
        if (p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index")) list = static_cast<int>(i);
      }
      if (list < 0) src.fail("face element lacks vertex_indices");
      for (std::size_t r = 0; r < el.count; ++r) {
        src.read_row(el, scalars, lists);
        const auto& ids = lists[list];
        if (ids.size() < 3) src.fail("face with fewer than 3 vertices");
        for (double id : ids) {
          if (id < 0 || id >= static_cast<double>(data.vertices.size()) || id != std::floor(id)) {
            src.fail("face index out of range");
          }
        }
        for (std::size_t i = 1; i + 1 < ids.size(); ++i) {
          data.triangles.push_back({static_cast<std::int32_t>(ids[0]), static_cast<std::int32_t>(ids[i]),
                                    static_cast<std::int32_t>(ids[i + 1])});
        }
      }
    } else {
      for (std::size_t r = 0; r < el.count; ++r) src.read_row(el, scalars, lists);
    }
  }
  return data;
}

void write_ply(const std::filesystem::path& path, const std::vector<Vec3>& vertices,
               const std::vector<Vec3>& normals, const std::vector<std::array<std::int32_t, 3>>* triangles,
               PlyEncoding encoding) {
  const bool binary = encoding == PlyEncoding::BinaryLittleEndian;
  auto os = open_output(path, true);
  std::ostringstream header;
  header << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  header << "element vertex " << vertices.size() << "\n";
  header << "property float x\nproperty float y\nproperty float z\n";
  if (!normals.empty()) header << "property float nx\nproperty float ny\nproperty float nz\n";
  if (triangles) {
    header << "element face " << triangles->size() << "\n";
    header << "property list uchar int vertex_indices\n";
  }
  header << "end_header\n";
  const std::string h = header.str();
  os.write(h.data(), static_cast<std::streamsize>(h.size()));

  char buf[256];
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    float v[6];
    int nv = 3;
    v[0] = static_cast<float>(vertices[i].x);
    v[1] = static_cast<float>(vertices[i].y);
    v[2] = static_cast<float>(vertices[i].z);
    if (!normals.empty()) {
      v[3] = static_cast<float>(normals[i].x);
      v[4] = static_cast<float>(normals[i].y);
      v[5] = static_cast<float>(normals[i].z);
      nv = 6;
    }
    if (binary) {
      os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(nv * sizeof(float)));
    } else {
      int len = 0;
      for (int k = 0; k < nv; ++k) {
        len += std::snprintf(buf + len, sizeof buf - len, k + 1 < nv ? "%.9g " : "%.9g\n", static_cast<double>(v[k]));
      }
      os.write(buf, len);
    }
  }
  if (triangles) {
    for (const auto& t : *triangles) {
      if (binary) {
        const std::uint8_t three = 3;
        os.write(reinterpret_cast<const char*>(&three), 1);
        os.write(reinterpret_cast<const char*>(t.data()), 3 * sizeof(std::int32_t));
      } else {
        const int len = std::snprintf(buf, sizeof buf, "3 %d %d %d\n", t[0], t[1], t[2]);
        os.write(buf, len);
      }
    }
  }
  finish(os, path);
}

[[noreturn]] void unknown_extension(const std::filesystem::path& path) {
  throw FormatError(path.string() + ": unsupported file extension '" + path.extension().string() + "'");
}

}  // namespace

PointCloud read_point_cloud(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  PointCloud cloud;
  if (ext == ".xyz") return read_xyz(path);
  if (ext == ".ply") {
    PlyData d = read_ply(path);
    cloud.points = std::move(d.vertices);
    cloud.normals = std::move(d.normals);
  } else if (ext == ".obj") {
    ObjData d = read_obj(path);
    cloud.points = std::move(d.vertices);
    if (d.normals.size() == cloud.points.size()) {
      for (const Vec3& n : d.normals) cloud.normals.push_back(unit_normal(n, path, 0));
    }
  } else {
    unknown_extension(path);
  }
  if (cloud.points.empty()) throw FormatError(path.string() + ": no points");
  return cloud;
}

Mesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  Mesh mesh;
  if (ext == ".ply") {
    PlyData d = read_ply(path);
    mesh.vertices = std::move(d.vertices);
    mesh.triangles = std::move(d.triangles);
  } else if (ext == ".obj") {
    ObjData d = read_obj(path);
    mesh.vertices = std::move(d.vertices);
    mesh.triangles = std::move(d.triangles);
  } else {
    unknown_extension(path);
  }
  return mesh;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud, PlyEncoding encoding) {
  if (cloud.has_normals() && cloud.normals.size() != cloud.points.size()) {
    throw InvalidInput("point cloud normals do not match its points");
  }
  const std::string ext = lower_extension(path);
  if (ext == ".xyz") {
    write_xyz(path, cloud);
  } else if (ext == ".ply") {
    write_ply(path, cloud.points, cloud.normals, nullptr, encoding);
  } else if (ext == ".obj") {
    write_obj(path, cloud.points, {});
  } else {
    unknown_extension(path);
  }
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh, PlyEncoding encoding) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") {
    write_obj(path, mesh.vertices, mesh.triangles);
  } else if (ext == ".ply") {
    write_ply(path, mesh.vertices, {}, &mesh.triangles, encoding);
  } else {
    unknown_extension(path);
  }
}

}  // namespace gridpull
