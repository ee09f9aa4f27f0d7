#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridpull/mesh.hpp"
#include "gridpull/vec3.hpp"

namespace gridpull {

struct SampledSurface {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit normals of the sampled triangles
};

// n area-weighted samples on the mesh; deterministic per seed. Zero-area
// triangles are never sampled. Throws InvalidInput for an empty mesh.
SampledSurface sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

struct ChamferDistance {
  double cd_l1 = 0.0;
  double cd_l2 = 0.0;
};

// Half the sum of the two directed mean nearest distances (L1: distance,
// L2: squared distance).
ChamferDistance chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

struct HausdorffDistance {
  double hd = 0.0;
  double one_sided_mean = 0.0;  // mean over a of min_b |a-b|
  double one_sided_max = 0.0;   // max over a of min_b |a-b|
};

HausdorffDistance hausdorff(std::span<const Vec3> a, std::span<const Vec3> b);

// Harmonic mean of precision (a within tau of b) and recall (b within tau of a).
double f_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau);

// Mean absolute cosine between normals of nearest-neighbour pairs, averaged
// over both directions.
double normal_consistency(const SampledSurface& a, const SampledSurface& b);

// Per-point nearest distance from every point of `from` to the set `to`.
std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to);

}  // namespace gridpull
