#include "gridpull/spatial_index.hpp"

#include <algorithm>
#include <limits>

#include "gridpull/errors.hpp"

namespace gridpull {

SurfaceIndex::SurfaceIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (points_.empty()) throw InvalidInput("cannot index an empty point set");
  if (points_.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw InvalidInput("point set too large for the spatial index");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!is_finite(points_[i])) {
      throw InvalidInput("point " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int32_t>(i);
  nodes_.reserve(2 * (points_.size() / kLeafSize + 1));
  build(0, static_cast<std::int32_t>(order_.size()));
  leaf_points_.resize(order_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) leaf_points_[i] = points_[order_[i]];
}

std::int32_t SurfaceIndex::build(std::int32_t begin, std::int32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::int32_t i = begin + 1; i < end; ++i) {
    const Vec3& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  const std::int32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::int32_t a, std::int32_t b) { return points_[a][axis] < points_[b][axis]; });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.left = left;
  n.right = right;
  n.begin = begin;
  n.end = end;
  return id;
}

double SurfaceIndex::box_distance2(const Node& node, const Vec3& q) const {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double gap = std::max({node.lo[a] - q[a], q[a] - node.hi[a], 0.0});
    d2 += gap * gap;
  }
  return d2;
}

void SurfaceIndex::search(std::int32_t node_id, const Vec3& q, double& best_d2, std::int64_t& best_id) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::int32_t i = node.begin; i < node.end; ++i) {
      const double d2 = squared_distance(q, leaf_points_[i]);
      if (d2 < best_d2 || (d2 == best_d2 && order_[i] < best_id)) {
        best_d2 = d2;
        best_id = order_[i];
      }
    }
    return;
  }
  // Nearer box first. Equal distances still descend so ties resolve to the
  // lowest id.
  std::int32_t first = node.left;
  std::int32_t second = node.right;
  double d_first = box_distance2(nodes_[first], q);
  double d_second = box_distance2(nodes_[second], q);
  if (d_second < d_first) {
    std::swap(first, second);
    std::swap(d_first, d_second);
  }
  if (d_first <= best_d2) search(first, q, best_d2, best_id);
  if (d_second <= best_d2) search(second, q, best_d2, best_id);
}

Neighbor SurfaceIndex::nearest(const Vec3& q) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  std::int64_t best_id = std::numeric_limits<std::int64_t>::max();
  search(0, q, best_d2, best_id);
  return {best_id, std::sqrt(best_d2)};
}

Neighbor SurfaceIndex::nearest(const Vec3& q, std::int64_t hint_id) const {
  double best_d2 = squared_distance(q, points_[hint_id]);
  std::int64_t best_id = hint_id;
  search(0, q, best_d2, best_id);
  return {best_id, std::sqrt(best_d2)};
}

SurfaceIndex build_index(std::span<const Vec3> points) { return SurfaceIndex(points); }

}  // namespace gridpull
