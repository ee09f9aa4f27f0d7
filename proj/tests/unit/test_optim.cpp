#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "gridpull/errors.hpp"
#include "gridpull/optim.hpp"
#include "gridpull/synth.hpp"
#include "test_support.hpp"

using namespace gridpull;

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at(cfg, 0) == 1.0);
  CHECK(lr_at(cfg, 399) == 1.0);
  CHECK(lr_at(cfg, 400) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(lr_at(cfg, 800) == doctest::Approx(0.09).epsilon(1e-15));
  double prev = lr_at(cfg, 0);
  for (std::int64_t i = 1; i < 2000; ++i) {
    const double lr = lr_at(cfg, i);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_at(cfg, -1), InvalidInput);
}

TEST_CASE("adam_step") {
  auto field = test::full_field(4, std::vector<double>(125, 0.25));
  AdamState state(field.parameter_count());
  GradientBuffer grad(field);

  SUBCASE("zero gradient leaves values unchanged") {
    const auto before = field.values;
    adam_step(state, field, grad, 1.0);
    CHECK(field.values == before);
    CHECK(state.t == 1);
  }
  SUBCASE("first step moves by about lr against the gradient") {
    const std::int64_t v = 37;
    grad.values()[field.parameter_of_vertex[v]] = 3.5;
    adam_step(state, field, grad, 0.01);
    CHECK(field.values[v] == doctest::Approx(0.25 - 0.01).epsilon(1e-8));
    CHECK(field.values[v + 1] == 0.25);
  }
  SUBCASE("hand-evaluated second step") {
    const std::int64_t v = 10;
    const auto p = field.parameter_of_vertex[v];
    grad.values()[p] = 2.0;
    adam_step(state, field, grad, 0.1);
    grad.values()[p] = -1.0;
    adam_step(state, field, grad, 0.1);
    const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0;
    const double s = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;
    const double m_hat = m / (1 - 0.81);
    const double s_hat = s / (1 - 0.999 * 0.999);
    const double expected = 0.25 - 0.1 * (2.0 / (2.0 + 1e-8)) - 0.1 * m_hat / (std::sqrt(s_hat) + 1e-8);
    CHECK(field.values[v] == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient aborts the step") {
    const auto before = field.values;
    grad.values()[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(state, field, grad, 1.0), NumericError);
    CHECK(field.values == before);
    CHECK(state.t == 0);
  }
  SUBCASE("frozen vertices never change") {
    auto partial = test::full_field(4, std::vector<double>(125, 0.25));
    for (std::int64_t v = 0; v < 60; ++v) partial.optimized_mask[v] = 0;
    partial.index_parameters();
    AdamState st(partial.parameter_count());
    GradientBuffer g(partial);
    for (auto& x : g.values()) x = 1.0;
    adam_step(st, partial, g, 0.5);
    for (std::int64_t v = 0; v < 125; ++v) CHECK((v < 60) == (partial.values[v] == 0.25));
  }
}

TEST_CASE("train: small sphere run") {
  const auto shape = synth_shape(ShapeKind::Sphere, {}, 3000, 0.0, 4);
  TrainConfig cfg;
  cfg.resolution = 24;
  cfg.m2 = 6;
  cfg.iterations = 120;
  cfg.queries_per_iter = 3000;
  cfg.decay_every = 40;
  cfg.seed = 3;
  std::vector<ProgressRecord> log;
  const auto result = train(shape.cloud.points, cfg, [&](const ProgressRecord& r) { log.push_back(r); });
  REQUIRE(log.size() == 120);
  CHECK(log.front().iter == 0);
  CHECK(log[40].lr == doctest::Approx(0.3));
  for (double v : result.field.values) CHECK(std::isfinite(v));

  double early = 0.0;
  double late = 0.0;
  for (int i = 0; i < 10; ++i) {
    early += log[i].loss.total;
    late += log[110 + i].loss.total;
  }
  CHECK(late < early);

  // Only optimized vertices ever leave their (sign-corrected) initialization.
  std::vector<Vec3> normalized;
  Vec3 centroid;
  for (const Vec3& p : shape.cloud.points) {
    normalized.push_back(result.transform.apply(p));
    centroid += normalized.back();
  }
  centroid = centroid / static_cast<double>(normalized.size());
  auto init = make_field(result.field.grid, normalized, cfg.m1, cfg.m2, centroid, cfg.sphere_radius_cells);
  orient_enclosed(init, normalized);
  CHECK(init.optimized_mask == result.field.optimized_mask);
  for (std::size_t v = 0; v < init.values.size(); ++v) {
    if (!result.field.optimized_mask[v]) CHECK(result.field.values[v] == doctest::Approx(init.values[v]).epsilon(1e-12));
  }

  SUBCASE("bit-reproducible") {
    const auto again = train(shape.cloud.points, cfg);
    CHECK(again.field.values == result.field.values);
  }
}

TEST_CASE("train: learning-rate unit") {
  // Adam's bias-corrected first step is step * |g| / (|g| + eps): never longer
  // than the step, and equal to it up to eps for large gradients.
  const auto shape = synth_shape(ShapeKind::Sphere, {}, 2000, 0.0, 8);
  TrainConfig cfg;
  cfg.resolution = 16;
  cfg.m2 = 4;
  cfg.iterations = 0;
  cfg.queries_per_iter = 2000;
  cfg.lr0 = 0.5;
  const auto init = train(shape.cloud.points, cfg);
  cfg.iterations = 1;
  for (int reference : {256, 64, 0}) {
    cfg.lr_reference_resolution = reference;
    const double step = reference > 0 ? cfg.lr0 / reference : cfg.lr0;
    const auto one = train(shape.cloud.points, cfg);
    double longest = 0.0;
    for (std::size_t v = 0; v < init.field.values.size(); ++v) {
      const double delta = std::abs(one.field.values[v] - init.field.values[v]);
      CHECK(delta <= step * (1 + 1e-12));
      longest = std::max(longest, delta);
    }
    CHECK(longest == doctest::Approx(step).epsilon(1e-6));
  }
  cfg.lr_reference_resolution = -1;
  CHECK_THROWS_AS(train(shape.cloud.points, cfg), InvalidInput);
}

TEST_CASE("train rejects bad configs") {
  const auto shape = synth_shape(ShapeKind::Sphere, {}, 200, 0.0, 1);
  TrainConfig cfg;
  cfg.resolution = 1;
  CHECK_THROWS_AS(train(shape.cloud.points, cfg), InvalidInput);
  cfg = TrainConfig{};
  cfg.lr0 = 0.0;
  CHECK_THROWS_AS(train(shape.cloud.points, cfg), InvalidInput);
  cfg = TrainConfig{};
  cfg.weights.alpha = -1;
  CHECK_THROWS_AS(train(shape.cloud.points, cfg), InvalidInput);
  CHECK_THROWS_AS(train(std::vector<Vec3>{}, TrainConfig{}), InvalidInput);

  TrainConfig noisy;
  noisy.apply_noise_preset();
  CHECK(noisy.weights.alpha == 2.0);
}
