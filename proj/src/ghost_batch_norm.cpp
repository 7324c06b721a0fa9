#include <cmath>
#include <stdexcept>

#include "danet/layers.hpp"

namespace danet {

GhostBatchNorm::GhostBatchNorm(std::size_t dim, std::size_t ghost)
    : gamma(dim, 1.0),
      beta(dim, 0.0),
      running_mean(dim, 0.0),
      running_var(dim, 1.0),
      ghost_size(ghost) {
  if (ghost == 0) throw std::invalid_argument("GhostBatchNorm: ghost_size must be at least 1");
}

namespace {

void check_width(const GhostBatchNorm& bn, const Matrix& x) {
  if (x.cols() != bn.dim()) {
    throw ShapeError("GhostBatchNorm: input " + x.shape_string() + " for feature width " +
                     std::to_string(bn.dim()));
  }
}

}  // namespace

Matrix GhostBatchNorm::forward_train(const Matrix& x, BnContext& ctx) {
  check_width(*this, x);
  if (x.rows() == 0) throw ShapeError("GhostBatchNorm: empty batch");
  const std::size_t d = dim();
  const std::size_t n = x.rows();
  const std::size_t chunks = (n + ghost_size - 1) / ghost_size;

  ctx.ghost_size = ghost_size;
  ctx.normalized = Matrix(n, d);
  ctx.inv_std.assign(chunks, Vector(d));
  Matrix y(n, d);
  Vector mean_acc(d, 0.0);
  Vector var_acc(d, 0.0);

  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * ghost_size;
    const std::size_t end = std::min(n, begin + ghost_size);
    const double count = static_cast<double>(end - begin);
    Vector mean(d, 0.0);
    Vector var(d, 0.0);
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t j = 0; j < d; ++j) mean[j] += x(r, j);
    for (double& m : mean) m /= count;
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x(r, j) - mean[j];
        var[j] += diff * diff;
      }
    for (double& v : var) v /= count;

    Vector& inv = ctx.inv_std[c];
    for (std::size_t j = 0; j < d; ++j) inv[j] = 1.0 / std::sqrt(var[j] + eps);
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double xhat = (x(r, j) - mean[j]) * inv[j];
        ctx.normalized(r, j) = xhat;
        y(r, j) = gamma[j] * xhat + beta[j];
      }
    for (std::size_t j = 0; j < d; ++j) {
      mean_acc[j] += mean[j];
      var_acc[j] += var[j];
    }
  }

  const double chunk_count = static_cast<double>(chunks);
  for (std::size_t j = 0; j < d; ++j) {
    running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * (mean_acc[j] / chunk_count);
    running_var[j] = (1.0 - momentum) * running_var[j] + momentum * (var_acc[j] / chunk_count);
  }
  stats_ready = true;
  return y;
}

Matrix GhostBatchNorm::forward_eval(const Matrix& x) const {
  check_width(*this, x);
  const std::size_t d = dim();
  Vector inv(d);
  for (std::size_t j = 0; j < d; ++j) inv[j] = 1.0 / std::sqrt(running_var[j] + eps);
  Matrix y(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j)
      y(r, j) = gamma[j] * ((x(r, j) - running_mean[j]) * inv[j]) + beta[j];
  return y;
}

Matrix GhostBatchNorm::backward(const BnContext& ctx, const Matrix& grad_y, BnGrads& grads) const {
  require_same_shape(ctx.normalized, grad_y, "GhostBatchNorm::backward");
  const std::size_t d = dim();
  const std::size_t n = grad_y.rows();
  if (grads.gamma.size() != d) grads.gamma.assign(d, 0.0);
  if (grads.beta.size() != d) grads.beta.assign(d, 0.0);

  Matrix grad_x(n, d);
  for (std::size_t c = 0; c < ctx.inv_std.size(); ++c) {
    const std::size_t begin = c * ctx.ghost_size;
    const std::size_t end = std::min(n, begin + ctx.ghost_size);
    const double count = static_cast<double>(end - begin);
    Vector sum_g(d, 0.0);
    Vector sum_gx(d, 0.0);
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double g = grad_y(r, j);
        const double xhat = ctx.normalized(r, j);
        grads.beta[j] += g;
        grads.gamma[j] += g * xhat;
        sum_g[j] += g * gamma[j];
        sum_gx[j] += g * gamma[j] * xhat;
      }
    const Vector& inv = ctx.inv_std[c];
    for (std::size_t r = begin; r < end; ++r)
      for (std::size_t j = 0; j < d; ++j) {
        const double g_hat = grad_y(r, j) * gamma[j];
        const double xhat = ctx.normalized(r, j);
        grad_x(r, j) = inv[j] / count * (count * g_hat - sum_g[j] - xhat * sum_gx[j]);
      }
  }
  return grad_x;
}

}  // namespace danet
