#include "gridpull/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "gridpull/errors.hpp"

namespace gridpull {

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "cube") return ShapeKind::Cube;
  if (name == "torus") return ShapeKind::Torus;
  if (name == "plane") return ShapeKind::Plane;
  throw InvalidInput("unknown shape kind '" + std::string(name) + "'");
}

SynthShape synth_shape(ShapeKind kind, const ShapeParams& params, std::size_t n, double noise_sigma,
                       std::uint64_t seed) {
  if (n == 0) throw InvalidInput("sample count must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("noise sigma must be non-negative");
  const Vec3 c = params.center;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthShape out;
  auto& pts = out.cloud.points;
  auto& nrm = out.cloud.normals;
  pts.reserve(n);
  nrm.reserve(n);

  switch (kind) {
    case ShapeKind::Sphere: {
      const double r = params.radius;
      if (!(r > 0.0)) throw InvalidInput("sphere radius must be positive");
      for (std::size_t i = 0; i < n; ++i) {
        Vec3 d;
        double len = 0.0;
        do {
          d = {gauss(rng), gauss(rng), gauss(rng)};
          len = norm(d);
        } while (len < 1e-12);
        d = d / len;
        pts.push_back(c + d * r);
        nrm.push_back(d);
      }
      out.sdf = [c, r](const Vec3& p) { return distance(p, c) - r; };
      break;
    }
    case ShapeKind::Cube: {
      const double h = params.half_extent;
      if (!(h > 0.0)) throw InvalidInput("cube half extent must be positive");
      std::uniform_int_distribution<int> face(0, 5);
      for (std::size_t i = 0; i < n; ++i) {
        const int f = face(rng);
        const int axis = f / 2;
        const double side = (f % 2) ? 1.0 : -1.0;
        Vec3 p;
        Vec3 normal;
        p[axis] = side * h;
        normal[axis] = side;
        p[(axis + 1) % 3] = (2.0 * unit(rng) - 1.0) * h;
        p[(axis + 2) % 3] = (2.0 * unit(rng) - 1.0) * h;
        pts.push_back(c + p);
        nrm.push_back(normal);
      }
      out.sdf = [c, h](const Vec3& p) {
        const Vec3 q{std::abs(p.x - c.x) - h, std::abs(p.y - c.y) - h, std::abs(p.z - c.z) - h};
        const Vec3 outside{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
        return norm(outside) + std::min(std::max({q.x, q.y, q.z}), 0.0);
      };
      break;
    }
    case ShapeKind::Torus: {
      const double big = params.major_radius;
      const double small = params.minor_radius;
      if (!(small > 0.0) || !(small < big)) {
        throw InvalidInput("torus needs 0 < minor radius < major radius");
      }
      // Area density is proportional to (R + r cos(phi)); sample phi by rejection.
      for (std::size_t i = 0; i < n; ++i) {
        double phi;
        do {
          phi = 2.0 * std::numbers::pi * unit(rng);
        } while (unit(rng) * (big + small) > big + small * std::cos(phi));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        const Vec3 radial{std::cos(theta), std::sin(theta), 0.0};
        const Vec3 normal = radial * std::cos(phi) + Vec3{0.0, 0.0, std::sin(phi)};
        pts.push_back(c + radial * big + normal * small);
        nrm.push_back(normal);
      }
      out.sdf = [c, big, small](const Vec3& p) {
        const Vec3 d = p - c;
        const double ring = std::hypot(d.x, d.y) - big;
        return std::hypot(ring, d.z) - small;
      };
      break;
    }
    case ShapeKind::Plane: {
      const double h = params.half_extent;
      if (!(h > 0.0)) throw InvalidInput("plane half extent must be positive");
      for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(c + Vec3{(2.0 * unit(rng) - 1.0) * h, (2.0 * unit(rng) - 1.0) * h, 0.0});
        nrm.push_back({0.0, 0.0, 1.0});
      }
      out.sdf = [c](const Vec3& p) { return p.z - c.z; };
      break;
    }
  }

  if (noise_sigma > 0.0) {
    for (Vec3& p : pts) p += Vec3{gauss(rng), gauss(rng), gauss(rng)} * noise_sigma;
  }
  return out;
}

}  // namespace gridpull
