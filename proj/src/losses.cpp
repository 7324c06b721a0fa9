#include <cmath>
#include <stdexcept>

#include "danet/training.hpp"

namespace danet {

LossResult cross_entropy(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     logits.shape_string());
  }
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  LossResult out;
  out.grad = Matrix(n, classes);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(labels[r]) + " at row " +
                              std::to_string(r) + " outside [0, " + std::to_string(classes) + ")");
    }
    auto row = logits.row(r);
    double top = row[0];
    for (double v : row) top = std::max(top, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - top);
    const double log_z = top + std::log(sum);
    total += log_z - row[labels[r]];
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(row[c] - log_z);
      out.grad(r, c) = (p - (c == labels[r] ? 1.0 : 0.0)) * inv_n;
    }
  }
  out.loss = total * inv_n;
  return out;
}

MseResult mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw ShapeError("mse: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(target.size()) + " targets");
  }
  MseResult out;
  out.grad.resize(pred.size());
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    total += diff * diff;
    out.grad[i] = 2.0 * diff / n;
  }
  out.loss = total / n;
  return out;
}

}  // namespace danet
