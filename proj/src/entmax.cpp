#include "danet/entmax.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace danet {

EntmaxResult entmax15_forward(std::span<const double> logits) {
  const std::size_t n = logits.size();
  if (n == 0) throw ShapeError("entmax15_forward: empty input");
  if (!all_finite(logits)) throw std::domain_error("entmax15_forward: non-finite logit");

  // Work with x = (z - max z) / 2; the shift leaves the result unchanged and
  // keeps (x_i - tau)^2 free of cancellation for large logits.
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (logits[i] - top) / 2.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });

  // For support size k, tau_k solves sum_{i<=k} (x_(i) - tau)^2 = 1 (smaller root).
  // The support is the largest k with tau_k < x_(k).
  double sum = 0.0;
  double sum_sq = 0.0;
  double tau = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double v = x[order[k - 1]];
    sum += v;
    sum_sq += v * v;
    const double kd = static_cast<double>(k);
    const double mean = sum / kd;
    const double delta = std::max((1.0 - (sum_sq - kd * mean * mean)) / kd, 0.0);
    const double tau_k = mean - std::sqrt(delta);
    if (tau_k < v) {
      tau = tau_k;
    } else {
      break;
    }
  }

  EntmaxResult result;
  result.probs.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = x[i] - tau;
    if (gap > 0.0) {
      result.probs[i] = gap * gap;
      result.support.push_back(i);
    }
  }
  result.tau = tau + top / 2.0;
  return result;
}

Vector entmax15_backward(const EntmaxResult& result, std::span<const double> grad_out) {
  if (grad_out.size() != result.probs.size()) {
    throw ShapeError("entmax15_backward: gradient length " + std::to_string(grad_out.size()) +
                     " vs output length " + std::to_string(result.probs.size()));
  }
  Vector grad(result.probs.size(), 0.0);
  double dot = 0.0;
  double s_sum = 0.0;
  for (std::size_t i : result.support) {
    const double s = std::sqrt(result.probs[i]);
    grad[i] = s * grad_out[i];
    dot += grad[i];
    s_sum += s;
  }
  const double q = dot / s_sum;
  for (std::size_t i : result.support) grad[i] -= q * std::sqrt(result.probs[i]);
  return grad;
}

}  // namespace danet
