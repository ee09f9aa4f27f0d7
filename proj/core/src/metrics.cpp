#include "gridpull/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gridpull/errors.hpp"
#include "gridpull/spatial_index.hpp"

namespace gridpull {

namespace {

void require_nonempty(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InvalidInput("metric point sets must be non-empty");
}

std::vector<std::int64_t> nearest_ids(std::span<const Vec3> from, const SurfaceIndex& index) {
  std::vector<std::int64_t> ids(from.size());
  const auto n = static_cast<std::int64_t>(from.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) ids[i] = index.nearest(from[i]).point_id;
  return ids;
}

}  // namespace

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  require_nonempty(from, to);
  const SurfaceIndex index(to);
  std::vector<double> out(from.size());
  const auto n = static_cast<std::int64_t>(from.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = index.nearest(from[i]).distance;
  return out;
}

SampledSurface sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.triangles.empty()) throw InvalidInput("cannot sample an empty mesh");
  if (n == 0) throw InvalidInput("sample count must be positive");
  std::vector<double> cumulative(mesh.triangles.size());
  std::vector<Vec3> normals(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3 c = cross(mesh.vertices[tri[1]] - a, mesh.vertices[tri[2]] - a);
    const double len = norm(c);
    total += 0.5 * len;
    cumulative[t] = total;
    normals[t] = len > 0.0 ? c / len : Vec3{};
  }
  if (!(total > 0.0)) throw InvalidInput("mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampledSurface out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double target = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    const auto t = static_cast<std::size_t>(it - cumulative.begin());
    const auto& tri = mesh.triangles[t];
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    out.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
    out.normals.push_back(normals[t]);
  }
  return out;
}

ChamferDistance chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_nonempty(a, b);
  const auto ab = nearest_distances(a, b);
  const auto ba = nearest_distances(b, a);
  double l1_ab = 0.0;
  double l2_ab = 0.0;
  for (double d : ab) {
    l1_ab += d;
    l2_ab += d * d;
  }
  double l1_ba = 0.0;
  double l2_ba = 0.0;
  for (double d : ba) {
    l1_ba += d;
    l2_ba += d * d;
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return {0.5 * (l1_ab / na + l1_ba / nb), 0.5 * (l2_ab / na + l2_ba / nb)};
}

HausdorffDistance hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_nonempty(a, b);
  const auto ab = nearest_distances(a, b);
  const auto ba = nearest_distances(b, a);
  HausdorffDistance out;
  double sum = 0.0;
  for (double d : ab) {
    sum += d;
    out.one_sided_max = std::max(out.one_sided_max, d);
  }
  out.one_sided_mean = sum / static_cast<double>(a.size());
  out.hd = out.one_sided_max;
  for (double d : ba) out.hd = std::max(out.hd, d);
  return out;
}

double f_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau) {
  require_nonempty(a, b);
  if (!(tau > 0.0)) throw InvalidInput("F-score threshold must be positive");
  const auto ab = nearest_distances(a, b);
  const auto ba = nearest_distances(b, a);
  const auto within = [tau](const std::vector<double>& ds) {
    return static_cast<double>(std::count_if(ds.begin(), ds.end(), [tau](double d) { return d <= tau; })) /
           static_cast<double>(ds.size());
  };
  const double precision = within(ab);
  const double recall = within(ba);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double normal_consistency(const SampledSurface& a, const SampledSurface& b) {
  require_nonempty(a.points, b.points);
  if (a.normals.size() != a.points.size() || b.normals.size() != b.points.size()) {
    throw InvalidInput("normal consistency needs one normal per point");
  }
  const auto directed = [](const SampledSurface& from, const SampledSurface& to) {
    const SurfaceIndex index(to.points);
    const auto ids = nearest_ids(from.points, index);
    double sum = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) sum += std::abs(dot(from.normals[i], to.normals[ids[i]]));
    return sum / static_cast<double>(ids.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

}  // namespace gridpull
