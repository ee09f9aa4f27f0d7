#include "gridpull/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "gridpull/errors.hpp"
#include "gridpull/sampler.hpp"
#include "gridpull/spatial_index.hpp"

namespace gridpull {

void adam_step(AdamState& state, DistanceField& field, const GradientBuffer& grads, double lr) {
  const std::size_t n = field.parameter_count();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw InvalidInput("Adam state, gradient and field parameter counts disagree");
  }
  if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
  const auto g = grads.values();
  for (std::size_t p = 0; p < n; ++p) {
    if (!std::isfinite(g[p])) {
      throw NumericError("non-finite gradient at vertex " + std::to_string(field.parameter_vertices[p]));
    }
  }

  ++state.t;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < count; ++p) {
    double& m = state.m[p];
    double& v = state.v[p];
    m = b1 * m + (1.0 - b1) * g[p];
    v = b2 * v + (1.0 - b2) * g[p] * g[p];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    field.values[field.parameter_vertices[p]] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

void TrainConfig::validate() const {
  if (resolution < 2) throw InvalidInput("resolution must be at least 2");
  if (m1 < 0 || m2 < 0) throw InvalidInput("band widths must be non-negative");
  if (queries_per_iter < 1) throw InvalidInput("queries per iteration must be positive");
  if (iterations < 0) throw InvalidInput("iteration count must be non-negative");
  if (!(lr0 > 0.0)) throw InvalidInput("initial learning rate must be positive");
  if (!(decay > 0.0)) throw InvalidInput("decay rate must be positive");
  if (decay_every < 1) throw InvalidInput("decay interval must be positive");
  if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.gamma < 0.0) {
    throw InvalidInput("loss weights must be non-negative");
  }
  if (!(sphere_radius_cells > 0.0)) throw InvalidInput("sphere radius must be positive");
  if (lr_reference_resolution < 0) throw InvalidInput("learning-rate reference resolution must be non-negative");
}

double lr_at(const TrainConfig& config, std::int64_t iter) {
  if (iter < 0) throw InvalidInput("iteration must be non-negative");
  return config.lr0 * std::pow(config.decay, static_cast<double>(iter / config.decay_every));
}

TrainResult train(std::span<const Vec3> points, const TrainConfig& config, const ProgressSink& sink) {
  config.validate();
  NormalizedCloud cloud = normalize_cloud(points, config.padding);
  const Grid grid = build_grid(cloud.bbox_min, cloud.bbox_max, config.resolution);
  const SurfaceIndex index = build_index(cloud.points);

  Vec3 centroid;
  for (const Vec3& p : cloud.points) centroid += p;
  centroid = centroid / static_cast<double>(cloud.points.size());

  TrainResult result;
  result.transform = cloud.transform;
  result.field = make_field(grid, cloud.points, config.m1, config.m2, centroid, config.sphere_radius_cells);
  DistanceField& field = result.field;
  if (config.enclosed_sign) orient_enclosed(field, cloud.points);

  AdamState adam(field.parameter_count());
  LossOptions opts;
  opts.deterministic = config.deterministic;
  const auto surface_count = static_cast<std::size_t>(
      std::min<std::int64_t>(static_cast<std::int64_t>(cloud.points.size()), config.queries_per_iter));

  const double lr_unit = config.lr_reference_resolution > 0 ? 1.0 / config.lr_reference_resolution : 1.0;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t iter = 0; iter < config.iterations; ++iter) {
    const double lr = lr_at(config, iter);
    const auto iter_seed = static_cast<std::uint64_t>(iter);
    const QueryBatch batch =
        sample_queries(cloud.points, index, grid, field.cell_band_m1,
                       static_cast<std::size_t>(config.queries_per_iter), derive_seed(config.seed, 2 * iter_seed));
    const std::vector<Vec3> surface =
        sample_surface_batch(cloud.points, surface_count, derive_seed(config.seed, 2 * iter_seed + 1));

    LossResult loss = total_loss(field, batch, cloud.points, surface, config.weights, opts);
    try {
      adam_step(adam, field, loss.gradient, lr * lr_unit);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iter) + ": " + e.what());
    }
    result.final_loss = loss.report;

    if (sink) {
      ProgressRecord rec;
      rec.iter = iter;
      rec.lr = lr;
      rec.loss = loss.report;
      rec.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      sink(rec);
    }
  }
  return result;
}

}  // namespace gridpull
