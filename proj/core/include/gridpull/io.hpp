#pragma once

#include <filesystem>
#include <vector>

#include "gridpull/mesh.hpp"
#include "gridpull/vec3.hpp"

namespace gridpull {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or one unit normal per point

  bool has_normals() const { return !normals.empty(); }
};

enum class PlyEncoding { Ascii, BinaryLittleEndian };

// Dispatches on extension: .xyz (3 or 6 columns), .ply (ascii or
// binary_little_endian), .obj ("v" lines). Throws FormatError with a line or
// byte offset for malformed input, IoError when the file cannot be opened.
PointCloud read_point_cloud(const std::filesystem::path& path);

// .ply or .obj; faces are triangulated as fans.
Mesh read_mesh(const std::filesystem::path& path);

// .xyz, .ply or .obj.
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                       PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);

// .obj or .ply. An empty mesh produces a valid file with no faces.
void write_mesh(const std::filesystem::path& path, const Mesh& mesh,
                PlyEncoding encoding = PlyEncoding::BinaryLittleEndian);

}  // namespace gridpull
