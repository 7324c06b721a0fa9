#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "danet/numerics.hpp"

namespace danet {

// Output of the 1.5-entmax mapping. For i in support,
// probs[i] == (z[i] / 2 - tau)^2; every other entry is exactly zero.
struct EntmaxResult {
  Vector probs;
  std::vector<std::size_t> support;  // ascending indices
  double tau = 0.0;
};

// Exact sort-based 1.5-entmax. Ties in the sort keep the original index order.
EntmaxResult entmax15_forward(std::span<const double> logits);

// Vector-Jacobian product of entmax15_forward with respect to the logits.
Vector entmax15_backward(const EntmaxResult& result, std::span<const double> grad_out);

}  // namespace danet
