#include "gridpull/loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gridpull/errors.hpp"

namespace gridpull {

namespace {

// Unit direction of g with its norm floored at eps, and the Jacobian of that
// map applied to a vector (the Jacobian is symmetric).
struct Direction {
  Vec3 n;
  double inv_norm = 0.0;
  bool floored = false;

  Direction(const Vec3& g, double eps) {
    const double len = norm(g);
    floored = len < eps;
    inv_norm = 1.0 / (floored ? eps : len);
    n = g * inv_norm;
  }

  Vec3 jacobian_times(const Vec3& v) const {
    if (floored) return v * inv_norm;
    return (v - n * dot(n, v)) * inv_norm;
  }
};

// Up to 16 (vertex, dL/dd) pairs per sample; unused slots have vertex -1.
struct Contribution {
  std::array<std::int64_t, 16> ids;
  std::array<double, 16> values;
};

void scatter(const DistanceField& field, std::span<const Contribution> contribs, GradientBuffer& grad,
             bool deterministic) {
  auto out = grad.values();
  const auto& param = field.parameter_of_vertex;
  if (deterministic) {
    for (const Contribution& c : contribs) {
      for (int s = 0; s < 16; ++s) {
        if (c.ids[s] < 0) continue;
        const std::int32_t p = param[c.ids[s]];
        if (p >= 0) out[p] += c.values[s];
      }
    }
    return;
  }
  const auto n = static_cast<std::int64_t>(contribs.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const Contribution& c = contribs[i];
    for (int s = 0; s < 16; ++s) {
      if (c.ids[s] < 0) continue;
      const std::int32_t p = param[c.ids[s]];
      if (p >= 0) {
#pragma omp atomic
        out[p] += c.values[s];
      }
    }
  }
}

double ordered_sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

struct QueryTerms {
  bool pull = false;
  bool grad_consistency = false;
  double pull_scale = 0.0;
  double gc_scale = 0.0;
};

// Evaluates pull and gradient-consistency terms for every query in one pass.
// Returns mean pull and mean gradient-consistency loss.
std::pair<double, double> query_losses(const DistanceField& field, const QueryBatch& batch,
                                       std::span<const Vec3> points, const QueryTerms& terms,
                                       GradientBuffer* grad, const LossOptions& opts) {
  const std::size_t n = batch.count();
  if (n == 0) throw InvalidInput("query batch is empty");
  if (batch.nn_ids.size() != n) throw InvalidInput("query batch has mismatched nearest-neighbour ids");

  std::vector<double> pull_values(terms.pull ? n : 0);
  std::vector<double> gc_values(terms.grad_consistency ? n : 0);
  std::vector<Contribution> contribs(grad ? n : 0);
  const std::span<const double> d = field.values;
  const double inv_n = 1.0 / static_cast<double>(n);

  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    const Vec3& q = batch.queries[i];
    const Vec3& target = points[batch.nn_ids[i]];
    const CellStencil sq = cell_stencil(field.grid, q);
    const double f = sq.value(d);
    const Vec3 g = sq.gradient(d);
    const Direction dir(g, opts.eps_grad);

    Contribution* c = grad ? &contribs[i] : nullptr;
    if (c) {
      c->ids.fill(-1);
      c->values.fill(0.0);
      for (int k = 0; k < 8; ++k) c->ids[k] = sq.vertex_ids[k];
    }

    if (terms.pull) {
      const Vec3 r = q - dir.n * f - target;
      const double len = norm(r);
      pull_values[i] = len;
      if (c && len > 0.0) {
        const Vec3 e = r / len;
        const double e_n = dot(e, dir.n);
        const Vec3 w = dir.jacobian_times(e);
        const double s = terms.pull_scale * inv_n;
        for (int k = 0; k < 8; ++k) {
          c->values[k] += s * (-e_n * sq.weights[k] - f * dot(w, sq.gradient_weights[k]));
        }
      }
    }

    if (terms.grad_consistency) {
      const CellStencil st = cell_stencil(field.grid, target);
      const Direction dir_t(st.gradient(d), opts.eps_grad);
      const double cosine = dot(dir.n, dir_t.n);
      gc_values[i] = 1.0 - cosine;
      if (c) {
        const double s = terms.gc_scale * inv_n;
        const Vec3 wq = dir.jacobian_times(dir_t.n);
        const Vec3 wt = dir_t.jacobian_times(dir.n);
        for (int k = 0; k < 8; ++k) {
          c->values[k] -= s * dot(wq, sq.gradient_weights[k]);
          c->ids[8 + k] = st.vertex_ids[k];
          c->values[8 + k] = -s * dot(wt, st.gradient_weights[k]);
        }
      }
    }
  }

  if (grad) scatter(field, contribs, *grad, opts.deterministic);
  return {terms.pull ? ordered_sum(pull_values) * inv_n : 0.0,
          terms.grad_consistency ? ordered_sum(gc_values) * inv_n : 0.0};
}

void check_buffer(const DistanceField& field, const GradientBuffer* grad) {
  if (grad && grad->size() != field.parameter_count()) {
    throw InvalidInput("gradient buffer does not match the field's parameters");
  }
}

}  // namespace

void GradientBuffer::add_scaled(const GradientBuffer& other, double scale) {
  if (other.values_.size() != values_.size()) throw InvalidInput("gradient buffer size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

Vec3 pull_point(const DistanceField& field, const Vec3& q, const LossOptions& opts) {
  const CellStencil s = cell_stencil(field.grid, q);
  const Direction dir(s.gradient(field.values), opts.eps_grad);
  return q - dir.n * s.value(field.values);
}

double loss_pull(const DistanceField& field, const QueryBatch& batch, std::span<const Vec3> points,
                 GradientBuffer* grad, double scale, const LossOptions& opts) {
  check_buffer(field, grad);
  QueryTerms terms;
  terms.pull = true;
  terms.pull_scale = scale;
  return query_losses(field, batch, points, terms, grad, opts).first;
}

double loss_grad_consistency(const DistanceField& field, const QueryBatch& batch,
                             std::span<const Vec3> points, GradientBuffer* grad, double scale,
                             const LossOptions& opts) {
  check_buffer(field, grad);
  QueryTerms terms;
  terms.grad_consistency = true;
  terms.gc_scale = scale;
  return query_losses(field, batch, points, terms, grad, opts).second;
}

double loss_surface(const DistanceField& field, std::span<const Vec3> surface_batch, GradientBuffer* grad,
                    double scale, const LossOptions& opts) {
  check_buffer(field, grad);
  const std::size_t n = surface_batch.size();
  if (n == 0) throw InvalidInput("surface batch is empty");
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> values(n);
  std::vector<Contribution> contribs(grad ? n : 0);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    const CellStencil s = cell_stencil(field.grid, surface_batch[i]);
    const double f = s.value(field.values);
    values[i] = std::abs(f);
    if (grad) {
      Contribution& c = contribs[i];
      c.ids.fill(-1);
      c.values.fill(0.0);
      const double sign = f > 0.0 ? 1.0 : (f < 0.0 ? -1.0 : 0.0);
      for (int k = 0; k < 8; ++k) {
        c.ids[k] = s.vertex_ids[k];
        c.values[k] = scale * inv_n * sign * s.weights[k];
      }
    }
  }
  if (grad) scatter(field, contribs, *grad, opts.deterministic);
  return ordered_sum(values) * inv_n;
}

double loss_tv(const DistanceField& field, GradientBuffer* grad, double scale, const LossOptions& opts) {
  check_buffer(field, grad);
  const Grid& grid = field.grid;
  const int n = grid.vertices_per_axis();
  const std::int64_t stride[3] = {1, n, static_cast<std::int64_t>(n) * n};
  const std::span<const double> d = field.values;
  const auto params = static_cast<std::int64_t>(field.parameter_count());

  // Root-sum-square of differences to the in-grid axis neighbours.
  auto visit_neighbors = [&](std::int64_t v, auto&& fn) {
    const auto c = grid.vertex_coords(v);
    for (int a = 0; a < 3; ++a) {
      if (c[a] > 0) fn(v - stride[a]);
      if (c[a] < n - 1) fn(v + stride[a]);
    }
  };

  // Per-parameter root value and the floored reciprocal used by the
  // derivative; zero for parameters outside the band.
  std::vector<double> root(params, 0.0);
  std::vector<double> inv_root(params, 0.0);
  const double floor_root = std::sqrt(opts.eps_tv);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < params; ++p) {
    const std::int64_t v = field.parameter_vertices[p];
    if (!field.vertex_band_m2[v]) continue;
    double sum = 0.0;
    visit_neighbors(v, [&](std::int64_t u) {
      const double e = d[v] - d[u];
      sum += e * e;
    });
    root[p] = std::sqrt(sum);
    inv_root[p] = 1.0 / std::max(root[p], floor_root);
  }

  std::int64_t band_size = 0;
  double total = 0.0;
  for (std::int64_t p = 0; p < params; ++p) {
    if (field.vertex_band_m2[field.parameter_vertices[p]]) {
      ++band_size;
      total += root[p];
    }
  }
  if (band_size == 0) throw InvalidInput("TV band is empty");
  const double inv_band = 1.0 / static_cast<double>(band_size);

  if (grad) {
    auto out = grad->values();
    const auto& param = field.parameter_of_vertex;
    // Gather form: d/dd_v of sum_i T_i over i in {v} and v's neighbours.
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < params; ++p) {
      const std::int64_t v = field.parameter_vertices[p];
      double g = 0.0;
      visit_neighbors(v, [&](std::int64_t u) {
        const std::int32_t pu = param[u];
        const double inv_u = pu >= 0 ? inv_root[pu] : 0.0;
        g += (d[v] - d[u]) * (inv_root[p] + inv_u);
      });
      out[p] += scale * inv_band * g;
    }
  }
  return total * inv_band;
}

double weighted_total(const LossReport& parts, const LossWeights& weights) {
  return parts.pull + weights.alpha * parts.tv + weights.beta * parts.surface +
         weights.gamma * parts.grad_consistency;
}

LossResult total_loss(const DistanceField& field, const QueryBatch& batch, std::span<const Vec3> points,
                      std::span<const Vec3> surface_batch, const LossWeights& weights,
                      const LossOptions& opts) {
  if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.gamma < 0.0) {
    throw InvalidInput("loss weights must be non-negative");
  }
  LossResult result;
  result.gradient = GradientBuffer(field);
  QueryTerms terms;
  terms.pull = true;
  terms.pull_scale = 1.0;
  terms.grad_consistency = true;
  terms.gc_scale = weights.gamma;
  const auto [pull, gc] = query_losses(field, batch, points, terms, &result.gradient, opts);
  LossReport& r = result.report;
  r.pull = pull;
  r.grad_consistency = gc;
  r.tv = loss_tv(field, &result.gradient, weights.alpha, opts);
  r.surface = loss_surface(field, surface_batch, &result.gradient, weights.beta, opts);
  r.total = weighted_total(r, weights);
  if (!std::isfinite(r.total)) {
    throw NumericError("non-finite loss: pull=" + std::to_string(r.pull) + " tv=" + std::to_string(r.tv) +
                       " surface=" + std::to_string(r.surface) + " grad=" + std::to_string(r.grad_consistency));
  }
  return result;
}

}  // namespace gridpull
