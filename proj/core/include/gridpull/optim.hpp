#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gridpull/field.hpp"
#include "gridpull/loss.hpp"

namespace gridpull {

// Bias-corrected Adam over the optimized vertices of a field.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t parameters) : m(parameters, 0.0), v(parameters, 0.0) {}
};

// Applies one update to field.values at the optimized vertices. Throws
// NumericError (leaving state and values untouched) on a non-finite gradient.
void adam_step(AdamState& state, DistanceField& field, const GradientBuffer& grads, double lr);

struct TrainConfig {
  int resolution = 256;
  int m1 = 3;
  int m2 = 14;
  std::int64_t queries_per_iter = 50000;
  std::int64_t iterations = 1600;
  double lr0 = 1.0;
  double decay = 0.3;
  std::int64_t decay_every = 400;
  LossWeights weights;
  std::uint64_t seed = 0;
  double sphere_radius_cells = 2.0;
  double padding = 0.05;
  bool deterministic = true;
  // Learning rates count cells of a reference grid of this resolution over
  // the unit domain, so the Adam step is lr / lr_reference_resolution in
  // normalized units whatever R is. 0 applies the rate to normalized units.
  int lr_reference_resolution = 256;
  // Flip the initialization negative inside regions enclosed by the cloud.
  bool enclosed_sign = true;

  // Weights TV more heavily for noisy inputs.
  void apply_noise_preset() { weights.alpha = 2.0; }
  void validate() const;
};

// lr0 * decay^floor(iter / decay_every).
double lr_at(const TrainConfig& config, std::int64_t iter);

struct ProgressRecord {
  std::int64_t iter = 0;
  double lr = 0.0;
  LossReport loss;
  double wall_ms = 0.0;
};

using ProgressSink = std::function<void(const ProgressRecord&)>;

struct TrainResult {
  DistanceField field;
  NormalizeTransform transform;
  LossReport final_loss;
};

// Normalizes the cloud, builds grid, index and bands, initializes a sphere
// at the centroid (sign-corrected inside enclosed regions) and runs the
// configured number of Adam iterations.
TrainResult train(std::span<const Vec3> points, const TrainConfig& config, const ProgressSink& sink = {});

}  // namespace gridpull
