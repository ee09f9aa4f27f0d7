#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gridpull/errors.hpp"
#include "gridpull/io.hpp"
#include "test_support.hpp"

using namespace gridpull;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("gridpull_test_io_" + name);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, bool normals) {
  PointCloud c;
  c.points = test::random_points(rng, n, {-3, -3, -3}, {3, 3, 3});
  if (normals) {
    for (const Vec3& v : test::random_points(rng, n, {-1, -1, -1}, {1, 1, 1})) c.normals.push_back(v / norm(v));
  }
  return c;
}

Mesh random_mesh(std::mt19937_64& rng, std::size_t nv, std::size_t nf) {
  Mesh m;
  m.vertices = test::random_points(rng, nv, {-2, -2, -2}, {2, 2, 2});
  std::uniform_int_distribution<std::int32_t> id(0, static_cast<std::int32_t>(nv) - 1);
  for (std::size_t f = 0; f < nf; ++f) m.triangles.push_back({id(rng), id(rng), id(rng)});
  return m;
}

void check_close(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double rel) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k < 3; ++k) CHECK(std::abs(a[i][k] - b[i][k]) <= rel * std::max(1.0, std::abs(a[i][k])));
  }
}

// Reading must either succeed or raise a library error.
template <typename F>
void expect_clean(F&& read) {
  try {
    read();
  } catch (const Error&) {
  }
}

}  // namespace

TEST_CASE("point cloud round trips") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const bool normals = trial % 2 == 0;
    const auto cloud = random_cloud(rng, 1 + trial * 37, normals);

    const auto xyz = temp_path("cloud.xyz");
    write_point_cloud(xyz, cloud);
    const auto x = read_point_cloud(xyz);
    CHECK(x.points == cloud.points);  // %.17g is exact
    CHECK(x.has_normals() == normals);
    if (normals) check_close(x.normals, cloud.normals, 1e-15);

    for (auto enc : {PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian}) {
      const auto ply = temp_path("cloud.ply");
      write_point_cloud(ply, cloud, enc);
      const auto p = read_point_cloud(ply);
      check_close(p.points, cloud.points, 1e-6);
      CHECK(p.has_normals() == normals);
      if (normals) check_close(p.normals, cloud.normals, 1e-6);
    }

    const auto obj = temp_path("cloud.obj");
    write_point_cloud(obj, cloud);
    check_close(read_point_cloud(obj).points, cloud.points, 1e-8);
  }
}

TEST_CASE("mesh round trips") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mesh = random_mesh(rng, 3 + trial * 11, 1 + trial * 17);
    for (const char* name : {"mesh.obj", "mesh.ply"}) {
      for (auto enc : {PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian}) {
        const auto path = temp_path(name);
        write_mesh(path, mesh, enc);
        const auto back = read_mesh(path);
        CHECK(back.triangles == mesh.triangles);
        check_close(back.vertices, mesh.vertices, 1e-6);
      }
    }
  }

  Mesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.triangles = {{0, 1, 2}};
  const auto obj = temp_path("tri.obj");
  write_mesh(obj, tri);
  const std::string text = read_bytes(obj);
  std::size_t v_lines = 0;
  std::size_t f_lines = 0;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    v_lines += line.starts_with("v ");
    if (line.starts_with("f ")) {
      ++f_lines;
      CHECK(line == "f 1 2 3");
    }
  }
  CHECK(v_lines == 3);
  CHECK(f_lines == 1);

  for (const char* name : {"empty.obj", "empty.ply"}) {
    const auto path = temp_path(name);
    write_mesh(path, Mesh{});
    const auto back = read_mesh(path);
    CHECK(back.vertices.empty());
    CHECK(back.triangles.empty());
  }
}

TEST_CASE("readers accept format variations") {
  const auto xyz = temp_path("var.xyz");
  write_text(xyz, "# comment\n\n  1 2 3\n4\t5 6\r\n7 8 9");
  const auto c = read_point_cloud(xyz);
  REQUIRE(c.points.size() == 3);
  CHECK(c.points[1] == Vec3{4, 5, 6});
  CHECK(c.points[2] == Vec3{7, 8, 9});
  write_text(xyz, "+1.5 -2 +3e+1\n");
  CHECK(read_point_cloud(xyz).points[0] == Vec3{1.5, -2, 30});
  write_text(xyz, "+-1 2 3\n");
  CHECK_THROWS_AS(read_point_cloud(xyz), FormatError);

  const auto ply = temp_path("var.ply");
  write_text(ply,
             "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 4\nproperty double x\n"
             "property double y\nproperty double z\nproperty uchar red\nelement face 1\n"
             "property list uchar int vertex_indices\nend_header\n"
             "0 0 0 255\n1 0 0 0\n1 1 0 7\n0 1 0 9\n4 0 1 2 3\n");
  const auto quad = read_mesh(ply);
  CHECK(quad.vertices.size() == 4);
  REQUIRE(quad.triangles.size() == 2);
  CHECK(quad.triangles[0] == std::array<std::int32_t, 3>{0, 1, 2});
  CHECK(quad.triangles[1] == std::array<std::int32_t, 3>{0, 2, 3});

  const auto obj = temp_path("var.obj");
  write_text(obj, "# obj\nv 0 0 0\nv 1 0 0\nv 1 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2//1 -1\n");
  const auto m = read_mesh(obj);
  REQUIRE(m.triangles.size() == 1);
  CHECK(m.triangles[0] == std::array<std::int32_t, 3>{0, 1, 2});
}

TEST_CASE("malformed files raise format errors") {
  const auto xyz = temp_path("bad.xyz");
  write_text(xyz, "1 2 3\n1.0 2.0\n");
  try {
    read_point_cloud(xyz);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  write_text(xyz, "1 2 abc\n");
  CHECK_THROWS_AS(read_point_cloud(xyz), FormatError);
  write_text(xyz, "");
  CHECK_THROWS_AS(read_point_cloud(xyz), FormatError);
  write_text(xyz, "1 2 3 0 0 0\n");
  CHECK_THROWS_AS(read_point_cloud(xyz), FormatError);

  const auto ply = temp_path("bad.ply");
  write_text(ply, "plx\nformat ascii 1.0\nend_header\n");
  CHECK_THROWS_AS(read_mesh(ply), FormatError);
  write_text(ply, "ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n");
  CHECK_THROWS_AS(read_mesh(ply), FormatError);
  write_text(ply,
             "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
             "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
  CHECK_THROWS_AS(read_mesh(ply), FormatError);

  // Truncated binary body reports a byte offset.
  std::mt19937_64 rng(4);
  write_point_cloud(ply, random_cloud(rng, 20, false), PlyEncoding::BinaryLittleEndian);
  const std::string full = read_bytes(ply);
  write_text(ply, full.substr(0, full.size() - 5));
  try {
    read_point_cloud(ply);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }

  const auto obj = temp_path("bad.obj");
  write_text(obj, "v 0 0 0\nv 1 0 0\nf 1 2 5\n");
  CHECK_THROWS_AS(read_mesh(obj), FormatError);
  write_text(obj, "v 0 0\n");
  CHECK_THROWS_AS(read_mesh(obj), FormatError);

  CHECK_THROWS_AS(read_point_cloud(temp_path("x.stl")), FormatError);
  CHECK_THROWS_AS(read_point_cloud(temp_path("does_not_exist.xyz")), IoError);
  CHECK_THROWS_AS(write_mesh(fs::path("/nonexistent_dir/m.obj"), Mesh{}), IoError);
}

TEST_CASE("mutated files never crash the readers") {
  std::mt19937_64 rng(77);
  const auto cloud = random_cloud(rng, 30, true);
  const auto mesh = random_mesh(rng, 12, 20);
  struct Sample {
    std::string name;
    std::string bytes;
    bool is_mesh;
  };
  std::vector<Sample> samples;
  for (const char* name : {"fz.xyz", "fz.obj"}) {
    write_point_cloud(temp_path(name), cloud);
    samples.push_back({name, read_bytes(temp_path(name)), false});
  }
  for (auto enc : {PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian}) {
    write_mesh(temp_path("fz.ply"), mesh, enc);
    samples.push_back({"fz.ply", read_bytes(temp_path("fz.ply")), true});
  }
  write_mesh(temp_path("fz.obj"), mesh);
  samples.push_back({"fz.obj", read_bytes(temp_path("fz.obj")), true});

  std::uniform_int_distribution<int> byte(0, 255);
  for (const auto& s : samples) {
    std::uniform_int_distribution<std::size_t> pos(0, s.bytes.size() - 1);
    for (int trial = 0; trial < 200; ++trial) {
      std::string mutated = s.bytes;
      switch (trial % 3) {
        case 0:
          for (int k = 0; k < 4; ++k) mutated[pos(rng)] = static_cast<char>(byte(rng));
          break;
        case 1:
          mutated.resize(pos(rng));
          break;
        default:
          mutated.insert(pos(rng), 1, static_cast<char>(byte(rng)));
      }
      const auto path = temp_path("mut_" + s.name);
      write_text(path, mutated);
      if (s.is_mesh) {
        expect_clean([&] { read_mesh(path); });
      } else {
        expect_clean([&] { read_point_cloud(path); });
      }
    }
  }
}
