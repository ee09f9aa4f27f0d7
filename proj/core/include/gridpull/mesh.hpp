#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gridpull/vec3.hpp"

namespace gridpull {

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

}  // namespace gridpull
