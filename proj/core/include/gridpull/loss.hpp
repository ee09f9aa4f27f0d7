#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridpull/field.hpp"
#include "gridpull/sampler.hpp"

namespace gridpull {

struct LossWeights {
  double alpha = 1.0;    // total variation
  double beta = 1.0;     // surface
  double gamma = 0.005;  // gradient consistency
};

struct LossReport {
  double pull = 0.0;
  double tv = 0.0;
  double surface = 0.0;
  double grad_consistency = 0.0;
  double total = 0.0;
};

// dL/dd over the optimized vertices of a field, stored densely by parameter
// index (see DistanceField::parameter_vertices). Frozen vertices have no slot
// and read as zero.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(const DistanceField& field) : values_(field.parameter_count(), 0.0) {}

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double at(const DistanceField& field, std::int64_t vertex) const {
    const std::int32_t p = field.parameter_of_vertex[vertex];
    return p < 0 ? 0.0 : values_[p];
  }

  void add_scaled(const GradientBuffer& other, double scale);
  void clear() { std::fill(values_.begin(), values_.end(), 0.0); }

 private:
  std::vector<double> values_;
};

struct LossOptions {
  double eps_grad = 1e-8;  // floor on gradient norms
  double eps_tv = 1e-12;   // floor on the TV root argument (derivative only)
  // Ordered scatter of per-query contributions; bit-reproducible for any
  // thread count. When false, contributions are scattered with atomics.
  bool deterministic = true;
};

// p = q - f(q) * grad f(q) / |grad f(q)|.
Vec3 pull_point(const DistanceField& field, const Vec3& q, const LossOptions& opts = {});

// Each loss returns its mean over the batch (or band) and, when grad is
// non-null, accumulates scale * dLoss/dd into it.
double loss_pull(const DistanceField& field, const QueryBatch& batch, std::span<const Vec3> points,
                 GradientBuffer* grad = nullptr, double scale = 1.0, const LossOptions& opts = {});

double loss_tv(const DistanceField& field, GradientBuffer* grad = nullptr, double scale = 1.0,
               const LossOptions& opts = {});

double loss_surface(const DistanceField& field, std::span<const Vec3> surface_batch,
                    GradientBuffer* grad = nullptr, double scale = 1.0, const LossOptions& opts = {});

double loss_grad_consistency(const DistanceField& field, const QueryBatch& batch,
                             std::span<const Vec3> points, GradientBuffer* grad = nullptr,
                             double scale = 1.0, const LossOptions& opts = {});

// pull + alpha*tv + beta*surface + gamma*grad_consistency.
double weighted_total(const LossReport& parts, const LossWeights& weights);

struct LossResult {
  LossReport report;
  GradientBuffer gradient;
};

// L = pull + alpha*tv + beta*surface + gamma*grad_consistency. Throws
// NumericError if any term is non-finite.
LossResult total_loss(const DistanceField& field, const QueryBatch& batch, std::span<const Vec3> points,
                      std::span<const Vec3> surface_batch, const LossWeights& weights,
                      const LossOptions& opts = {});

}  // namespace gridpull
