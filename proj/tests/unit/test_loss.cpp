#include <random>

#include "doctest.h"
#include "gridpull/errors.hpp"
#include "gridpull/loss.hpp"
#include "test_support.hpp"

using namespace gridpull;
using test::full_field;
using test::relative_error;
using test::sample_vertices;

namespace {

struct Problem {
  DistanceField field;
  std::vector<Vec3> surface_points;
  QueryBatch batch;
  std::vector<Vec3> surface_batch;
};

// Perturbed sphere SDF on a full R^3 field with random queries whose nn ids
// point at a random surface cloud (found by brute force).
Problem random_problem(int resolution, std::uint64_t seed, std::size_t n_queries = 60) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.03);
  Problem pb;
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, resolution);
  auto values = sample_vertices(g, [&](const Vec3& v) { return distance(v, {0.5, 0.5, 0.5}) - 0.3 + noise(rng); });
  pb.field = full_field(resolution, std::move(values));
  pb.surface_points = test::random_points(rng, 40, {0.15, 0.15, 0.15}, {0.85, 0.85, 0.85});
  for (std::size_t i = 0; i < n_queries; ++i) {
    const Vec3 q = test::random_point(rng, {0.02, 0.02, 0.02}, {0.98, 0.98, 0.98});
    std::int64_t best = 0;
    for (std::size_t j = 1; j < pb.surface_points.size(); ++j) {
      if (squared_distance(q, pb.surface_points[j]) < squared_distance(q, pb.surface_points[best])) best = j;
    }
    pb.batch.queries.push_back(q);
    pb.batch.nn_ids.push_back(best);
  }
  pb.surface_batch = test::random_points(rng, 30, {0.05, 0.05, 0.05}, {0.95, 0.95, 0.95});
  return pb;
}

template <typename LossFn>
void check_against_finite_differences(DistanceField& field, const GradientBuffer& grad, LossFn&& loss,
                                      const std::vector<std::int64_t>& vertices, double tol) {
  const double h = 1e-6;
  for (std::int64_t v : vertices) {
    const double saved = field.values[v];
    field.values[v] = saved + h;
    const double up = loss();
    field.values[v] = saved - h;
    const double down = loss();
    field.values[v] = saved;
    const double fd = (up - down) / (2 * h);
    INFO("vertex " << v << " analytic " << grad.at(field, v) << " fd " << fd);
    CHECK(relative_error(grad.at(field, v), fd, 1e-7) < tol);
  }
}

std::vector<std::int64_t> random_vertices(const Grid& g, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> pick(0, g.vertex_count() - 1);
  std::vector<std::int64_t> out(n);
  for (auto& v : out) v = pick(rng);
  return out;
}

std::vector<std::int64_t> all_vertices(const Grid& g) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(g.vertex_count()));
  for (std::int64_t v = 0; v < g.vertex_count(); ++v) out[v] = v;
  return out;
}

}  // namespace

TEST_CASE("pull_point") {
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, 8);
  SUBCASE("points on the zero level set stay put") {
    const auto f = full_field(8, sample_vertices(g, [](const Vec3& v) { return v.x - 0.3; }));
    const Vec3 q{0.3, 0.61, 0.2};
    CHECK(distance(pull_point(f, q), q) < 1e-12);
  }
  SUBCASE("planar field") {
    const auto f = full_field(8, sample_vertices(g, [](const Vec3& v) { return v.z; }));
    const Vec3 p = pull_point(f, {0.5, 0.5, 0.8});
    CHECK(distance(p, {0.5, 0.5, 0.0}) < 1e-12);
  }
  SUBCASE("sphere SDF on a fine grid") {
    const Grid fine = build_grid({0, 0, 0}, {1, 1, 1}, 128);
    const Vec3 c{0.5, 0.5, 0.5};
    const double r = 0.3;
    const auto f = full_field(128, sample_vertices(fine, [&](const Vec3& v) { return distance(v, c) - r; }));
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0, 1);
    std::uniform_real_distribution<double> offset(-0.1, 0.1);
    for (int n = 0; n < 200; ++n) {
      Vec3 dir{gauss(rng), gauss(rng), gauss(rng)};
      dir = dir / norm(dir);
      const Vec3 q = c + dir * (r + offset(rng));
      const Vec3 projection = c + dir * r;
      CHECK(distance(pull_point(f, q), projection) <= 2 * fine.cell_size().x);
    }
  }
}

TEST_CASE("loss_pull") {
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, 8);
  SUBCASE("planar field pulls onto its nearest point") {
    auto f = full_field(8, sample_vertices(g, [](const Vec3& v) { return v.z; }));
    const std::vector<Vec3> pts{{0.3, 0.3, 0.0}};
    QueryBatch batch{{{0.3, 0.3, 0.2}}, {0}};
    CHECK(loss_pull(f, batch, pts) < 1e-12);
  }
  SUBCASE("query on the zero level set") {
    auto f = full_field(8, sample_vertices(g, [](const Vec3& v) { return v.x - 0.5; }));
    const std::vector<Vec3> pts{{0.7, 0.2, 0.9}};
    const Vec3 q{0.5, 0.4, 0.6};
    QueryBatch batch{{q}, {0}};
    CHECK(loss_pull(f, batch, pts) == doctest::Approx(distance(q, pts[0])).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences") {
    Problem pb = random_problem(8, 101);
    GradientBuffer grad(pb.field);
    loss_pull(pb.field, pb.batch, pb.surface_points, &grad);
    check_against_finite_differences(
        pb.field, grad, [&] { return loss_pull(pb.field, pb.batch, pb.surface_points); },
        random_vertices(pb.field.grid, 50, 1), 1e-4);
  }
  CHECK_THROWS_AS(loss_pull(full_field(8, std::vector<double>(729, 0.0)), QueryBatch{}, std::vector<Vec3>{}),
                  InvalidInput);
}

TEST_CASE("loss_tv") {
  const int r = 8;
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, r);
  const double h = g.cell_size().x;
  auto interior_only = [&](DistanceField& f) {
    for (std::int64_t v = 0; v < g.vertex_count(); ++v) {
      const auto c = g.vertex_coords(v);
      bool interior = true;
      for (int a = 0; a < 3; ++a) interior = interior && c[a] > 0 && c[a] < r;
      f.vertex_band_m2[v] = interior ? 1 : 0;
    }
  };
  SUBCASE("constant field") {
    auto f = full_field(r, std::vector<double>(729, 0.4));
    CHECK(loss_tv(f) == 0.0);
  }
  SUBCASE("linear field") {
    auto f = full_field(r, sample_vertices(g, [](const Vec3& v) { return v.x; }));
    interior_only(f);
    CHECK(loss_tv(f) == doctest::Approx(h * std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("single perturbed vertex") {
    const double delta = 0.013;
    auto f = full_field(r, std::vector<double>(729, 0.0));
    const auto center = g.vertex_id(4, 4, 4);
    f.values[center] = delta;
    std::fill(f.vertex_band_m2.begin(), f.vertex_band_m2.end(), 0);
    f.vertex_band_m2[center] = 1;
    const std::int64_t stride[3] = {1, 9, 81};
    for (auto s : stride) {
      f.vertex_band_m2[center + s] = 1;
      f.vertex_band_m2[center - s] = 1;
    }
    const double expected_sum = delta * std::sqrt(6.0) + 6 * delta;
    CHECK(loss_tv(f) * 7 == doctest::Approx(expected_sum).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences") {
    Problem pb = random_problem(8, 55);
    interior_only(pb.field);
    GradientBuffer grad(pb.field);
    loss_tv(pb.field, &grad);
    check_against_finite_differences(pb.field, grad, [&] { return loss_tv(pb.field); },
                                     all_vertices(pb.field.grid), 1e-4);
  }
}

TEST_CASE("loss_surface") {
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, 8);
  SUBCASE("zero at the stencil") {
    auto f = full_field(8, sample_vertices(g, [](const Vec3& v) { return v.y > 0.6 ? 1.0 : 0.0; }));
    const std::vector<Vec3> s{{0.3, 0.3, 0.3}, {0.1, 0.5, 0.9}};
    CHECK(loss_surface(f, s) == 0.0);
  }
  SUBCASE("constant field") {
    auto f = full_field(8, std::vector<double>(729, 0.2));
    std::mt19937_64 rng(1);
    CHECK(loss_surface(f, test::random_points(rng, 17)) == doctest::Approx(0.2).epsilon(1e-14));
  }
  SUBCASE("gradient matches finite differences") {
    Problem pb = random_problem(8, 77);
    GradientBuffer grad(pb.field);
    loss_surface(pb.field, pb.surface_batch, &grad);
    check_against_finite_differences(pb.field, grad, [&] { return loss_surface(pb.field, pb.surface_batch); },
                                     random_vertices(pb.field.grid, 50, 2), 1e-4);
  }
  CHECK_THROWS_AS(loss_surface(full_field(8, std::vector<double>(729, 0.0)), std::vector<Vec3>{}), InvalidInput);
}

TEST_CASE("loss_grad_consistency") {
  const Grid g = build_grid({0, 0, 0}, {1, 1, 1}, 8);
  // Left cells (x <= 0.25) carry one linear field, right cells (x >= 0.75) another.
  auto split_field = [&](auto left, auto right) {
    return full_field(8, sample_vertices(g, [&](const Vec3& v) {
                        if (v.x <= 0.25 + 1e-12) return left(v);
                        if (v.x >= 0.75 - 1e-12) return right(v);
                        return 0.0;
                      }));
  };
  const std::vector<Vec3> pts{{0.9, 0.5, 0.5}};
  QueryBatch batch{{{0.1, 0.45, 0.55}}, {0}};
  auto x = [](const Vec3& v) { return v.x; };
  auto neg_x = [](const Vec3& v) { return -v.x; };
  auto y = [](const Vec3& v) { return v.y; };
  CHECK(loss_grad_consistency(split_field(x, x), batch, pts) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(loss_grad_consistency(split_field(x, neg_x), batch, pts) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(loss_grad_consistency(split_field(x, y), batch, pts) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("gradient matches finite differences") {
    Problem pb = random_problem(8, 202);
    GradientBuffer grad(pb.field);
    loss_grad_consistency(pb.field, pb.batch, pb.surface_points, &grad);
    check_against_finite_differences(
        pb.field, grad, [&] { return loss_grad_consistency(pb.field, pb.batch, pb.surface_points); },
        random_vertices(pb.field.grid, 50, 3), 1e-4);
  }
  SUBCASE("bounded in [0, 2]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Problem pb = random_problem(6, seed);
      const double l = loss_grad_consistency(pb.field, pb.batch, pb.surface_points);
      CHECK(l >= 0.0);
      CHECK(l <= 2.0);
    }
  }
}

TEST_CASE("total_loss") {
  LossReport parts{0.1, 0.2, 0.3, 0.4, 0.0};
  CHECK(weighted_total(parts, LossWeights{1, 1, 0.005}) == doctest::Approx(0.602).epsilon(1e-14));
  CHECK(weighted_total(LossReport{}, LossWeights{}) == 0.0);

  Problem pb = random_problem(8, 9);
  const LossWeights w{1.0, 1.0, 0.005};
  const auto result = total_loss(pb.field, pb.batch, pb.surface_points, pb.surface_batch, w);
  const auto& r = result.report;
  CHECK(std::abs(r.total - (r.pull + w.alpha * r.tv + w.beta * r.surface + w.gamma * r.grad_consistency)) < 1e-12);
  CHECK(r.pull >= 0);
  CHECK(r.tv >= 0);
  CHECK(r.surface >= 0);
  CHECK(r.grad_consistency >= 0);

  GradientBuffer sum(pb.field);
  GradientBuffer part(pb.field);
  loss_pull(pb.field, pb.batch, pb.surface_points, &part);
  sum.add_scaled(part, 1.0);
  part.clear();
  loss_tv(pb.field, &part);
  sum.add_scaled(part, w.alpha);
  part.clear();
  loss_surface(pb.field, pb.surface_batch, &part);
  sum.add_scaled(part, w.beta);
  part.clear();
  loss_grad_consistency(pb.field, pb.batch, pb.surface_points, &part);
  sum.add_scaled(part, w.gamma);
  for (std::size_t i = 0; i < sum.size(); ++i) CHECK(std::abs(sum.values()[i] - result.gradient.values()[i]) < 1e-12);

  SUBCASE("full objective gradient on every band vertex") {
    const LossWeights strong{1.0, 1.0, 1.0};
    const auto res = total_loss(pb.field, pb.batch, pb.surface_points, pb.surface_batch, strong);
    check_against_finite_differences(
        pb.field, res.gradient,
        [&] { return total_loss(pb.field, pb.batch, pb.surface_points, pb.surface_batch, strong).report.total; },
        all_vertices(pb.field.grid), 1e-4);
  }
  SUBCASE("atomic and ordered scatter agree") {
    LossOptions atomic;
    atomic.deterministic = false;
    const auto other = total_loss(pb.field, pb.batch, pb.surface_points, pb.surface_batch, w, atomic);
    for (std::size_t i = 0; i < other.gradient.size(); ++i) {
      CHECK(std::abs(other.gradient.values()[i] - result.gradient.values()[i]) < 1e-12);
    }
  }
}

TEST_CASE("gradient buffer is zero outside the optimized set") {
  Problem pb = random_problem(8, 31);
  // Freeze the upper half of the grid.
  auto& f = pb.field;
  for (std::int64_t v = 0; v < f.grid.vertex_count(); ++v) {
    if (f.grid.vertex_coords(v)[2] > 4) {
      f.optimized_mask[v] = 0;
      f.vertex_band_m2[v] = 0;
    }
  }
  f.index_parameters();
  const auto res = total_loss(f, pb.batch, pb.surface_points, pb.surface_batch, LossWeights{});
  CHECK(res.gradient.size() == f.parameter_count());
  for (std::int64_t v = 0; v < f.grid.vertex_count(); ++v) {
    if (!f.optimized_mask[v]) CHECK(res.gradient.at(f, v) == 0.0);
  }
}
