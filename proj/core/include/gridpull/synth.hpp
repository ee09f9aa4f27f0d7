#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

#include "gridpull/io.hpp"

namespace gridpull {

enum class ShapeKind { Sphere, Cube, Torus, Plane };

ShapeKind parse_shape_kind(std::string_view name);

struct ShapeParams {
  Vec3 center;
  double radius = 0.4;        // sphere
  double half_extent = 0.35;  // cube half side, plane half side
  double major_radius = 0.35; // torus, in the xy plane
  double minor_radius = 0.12;
};

// Signed distance of the analytic shape (negative inside; the plane's
// "inside" is z < center.z).
using AnalyticSdf = std::function<double(const Vec3&)>;

struct SynthShape {
  PointCloud cloud;  // points with exact surface normals
  AnalyticSdf sdf;
};

// n points uniformly distributed over the shape's surface area, each offset by
// isotropic Gaussian noise of standard deviation noise_sigma. Normals are those
// of the underlying clean surface point. Deterministic per seed.
SynthShape synth_shape(ShapeKind kind, const ShapeParams& params, std::size_t n, double noise_sigma,
                       std::uint64_t seed);

}  // namespace gridpull
