#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridpull/vec3.hpp"

namespace gridpull {

struct Neighbor {
  std::int64_t point_id = -1;
  double distance = 0.0;
};

// Static kd-tree over a point set for exact nearest-neighbour queries.
// Nodes split at the median of the widest axis; leaves hold up to 16 points.
class SurfaceIndex {
 public:
  static constexpr int kLeafSize = 16;

  SurfaceIndex() = default;
  explicit SurfaceIndex(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  // Exact nearest point; equal distances resolve to the lowest point id.
  Neighbor nearest(const Vec3& q) const;

  // Same result as nearest(q), but seeds the search radius with a known point.
  Neighbor nearest(const Vec3& q, std::int64_t hint_id) const;

 private:
  struct Node {
    // Internal nodes: children at left/right, split on axis.
    // Leaves: axis == -1 and [begin, end) indexes into order_.
    std::int32_t axis = -1;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t begin = 0;
    std::int32_t end = 0;
    // Tight bounds of the node's points. On surface samples these are much
    // thinner than the kd cells, which span the empty space around a patch.
    Vec3 lo;
    Vec3 hi;
  };
  double box_distance2(const Node& node, const Vec3& q) const;

  std::int32_t build(std::int32_t begin, std::int32_t end);
  void search(std::int32_t node, const Vec3& q, double& best_d2, std::int64_t& best_id) const;

  std::vector<Vec3> points_;
  std::vector<std::int32_t> order_;
  std::vector<Vec3> leaf_points_;  // points_ permuted by order_, for contiguous leaf scans
  std::vector<Node> nodes_;
};

// Throws InvalidInput on empty input or non-finite coordinates.
SurfaceIndex build_index(std::span<const Vec3> points);

}  // namespace gridpull
