#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "danet/data.hpp"

namespace danet {
namespace {

double sum_of_squares_2_to_5(std::span<const double> v) {
  double y = 0.0;
  for (std::size_t i = 2; i <= 5; ++i) y += v[i] * v[i];
  return y;
}

double log_cos_mix(std::span<const double> v) {
  return std::abs(std::log(std::abs(v[0] - v[2])) + std::cos(v[5] + std::sin(v[6])) - 1e-8 * v[10]);
}

double paired_sines(std::span<const double> v) {
  double y = 0.0;
  for (auto [i, j] : {std::pair{6, 7}, std::pair{5, 8}}) {
    const double s = v[i] + v[j];
    y += -10.0 * std::sin(s / 10.0) + s * s;
  }
  return y;
}

bool uses_log(int formula, std::span<const double> v) {
  return formula == 2 || (formula == 4 && !(v[1] < 0.0));
}

}  // namespace

double synth_target(int formula, std::span<const double> v) {
  if (v.size() != kSynthFeatures) {
    throw ShapeError("synth_target: expected " + std::to_string(kSynthFeatures) + " features, got " +
                     std::to_string(v.size()));
  }
  switch (formula) {
    case 1: return sum_of_squares_2_to_5(v);
    case 2: return log_cos_mix(v);
    case 3: return paired_sines(v);
    case 4: return v[1] < 0.0 ? sum_of_squares_2_to_5(v) : log_cos_mix(v);
    default: throw std::invalid_argument("unknown synthetic formula " + std::to_string(formula));
  }
}

Dataset synth_generate(int formula, std::size_t n, std::uint64_t seed, TaskKind task) {
  if (formula < 1 || formula > 4) {
    throw std::invalid_argument("unknown synthetic formula " + std::to_string(formula) +
                                " (expected 1-4)");
  }
  if (n == 0) throw std::invalid_argument("synth_generate: n must be positive");
  Rng rng(seed);
  Dataset data;
  data.features = Matrix(n, kSynthFeatures);
  data.targets.resize(n);
  data.kinds.assign(kSynthFeatures, ColumnKind::kContinuous);
  data.categories.assign(kSynthFeatures, {});
  for (std::size_t i = 0; i < kSynthFeatures; ++i) data.feature_names.push_back("v" + std::to_string(i));
  data.target_name = "y";

  for (std::size_t r = 0; r < n; ++r) {
    auto row = data.features.row(r);
    // log|v0 - v2| is singular at v0 == v2: redraw the whole row.
    do {
      for (double& v : row) v = rng.normal();
    } while (uses_log(formula, row) && std::abs(row[0] - row[2]) < 1e-300);
    data.targets[r] = synth_target(formula, row);
  }

  if (task == TaskKind::kClassification) {
    Vector sorted = data.targets;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (double& y : data.targets) y = y > median ? 1.0 : 0.0;
    data.task = {TaskKind::kClassification, 2};
  } else {
    data.task = {TaskKind::kRegression, 0};
  }
  return data;
}

}  // namespace danet
