#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "danet/data.hpp"

namespace danet {

double LooTable::encode(const std::string& category) const {
  const auto it = stats.find(category);
  if (it == stats.end() || it->second.second == 0) return global_mean;
  return it->second.first / static_cast<double>(it->second.second);
}

LooFit loo_fit(std::span<const std::string> column, std::span<const double> targets) {
  if (column.empty()) throw std::invalid_argument("loo_fit: empty column");
  if (column.size() != targets.size()) {
    throw ShapeError("loo_fit: " + std::to_string(column.size()) + " categories for " +
                     std::to_string(targets.size()) + " targets");
  }
  LooFit fit;
  double total = 0.0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    auto& [sum, count] = fit.table.stats[column[i]];
    sum += targets[i];
    ++count;
    total += targets[i];
  }
  fit.table.global_mean = total / static_cast<double>(column.size());
  fit.codes.resize(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    const auto& [sum, count] = fit.table.stats.at(column[i]);
    fit.codes[i] = count > 1 ? (sum - targets[i]) / static_cast<double>(count - 1)
                             : fit.table.global_mean;
  }
  return fit;
}

Vector loo_apply(const LooTable& table, std::span<const std::string> column) {
  Vector codes(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) codes[i] = table.encode(column[i]);
  return codes;
}

ZScore zscore_fit(const Matrix& features, const std::vector<bool>& active) {
  if (active.size() != features.cols()) throw ShapeError("zscore_fit: column flags mismatch");
  ZScore z;
  z.active = active;
  z.mean.assign(features.cols(), 0.0);
  z.stddev.assign(features.cols(), 1.0);
  const double n = static_cast<double>(features.rows());
  if (features.rows() == 0) return z;
  for (std::size_t j = 0; j < features.cols(); ++j) {
    if (!active[j]) continue;
    double sum = 0.0;
    for (std::size_t r = 0; r < features.rows(); ++r) sum += features(r, j);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 0; r < features.rows(); ++r) {
      const double d = features(r, j) - mean;
      ss += d * d;
    }
    z.mean[j] = mean;
    z.stddev[j] = std::sqrt(ss / n);
  }
  return z;
}

Matrix zscore_apply(const ZScore& z, const Matrix& features) {
  if (z.active.size() != features.cols()) {
    throw ShapeError("zscore_apply: fitted on " + std::to_string(z.active.size()) +
                     " columns, got " + features.shape_string());
  }
  Matrix out = features;
  for (std::size_t j = 0; j < features.cols(); ++j) {
    if (!z.active[j]) continue;
    const bool flat = z.stddev[j] < 1e-12;
    for (std::size_t r = 0; r < features.rows(); ++r) {
      out(r, j) = flat ? 0.0 : (features(r, j) - z.mean[j]) / z.stddev[j];
    }
  }
  return out;
}

Preprocessor Preprocessor::fit(const Dataset& train) {
  if (train.rows() == 0) throw std::invalid_argument("Preprocessor::fit: no training rows");
  Preprocessor p;
  p.kinds = train.kinds;
  p.loo.assign(train.cols(), LooTable{});
  std::vector<bool> active(train.cols());
  for (std::size_t j = 0; j < train.cols(); ++j) {
    active[j] = train.kinds[j] == ColumnKind::kContinuous;
    if (train.kinds[j] == ColumnKind::kCategorical) {
      p.loo[j] = loo_fit(train.categories[j], train.targets).table;
    }
  }
  p.zscore = zscore_fit(train.features, active);
  p.fitted = true;
  return p;
}

namespace {

Dataset finish_transform(const Preprocessor& p, Dataset out) {
  out.features = zscore_apply(p.zscore, out.features);
  out.kinds.assign(out.cols(), ColumnKind::kContinuous);
  out.categories.assign(out.cols(), {});
  return out;
}

void check_fitted(const Preprocessor& p, const Dataset& data) {
  if (!p.fitted) throw std::logic_error("Preprocessor used before fit");
  if (data.cols() != p.kinds.size() || data.kinds != p.kinds) {
    throw ShapeError("Preprocessor: dataset has " + std::to_string(data.cols()) +
                     " feature columns of different kinds than the " +
                     std::to_string(p.kinds.size()) + " it was fitted on");
  }
}

}  // namespace

Dataset Preprocessor::transform_train(const Dataset& train) const {
  check_fitted(*this, train);
  Dataset out = train;
  for (std::size_t j = 0; j < train.cols(); ++j) {
    if (kinds[j] != ColumnKind::kCategorical) continue;
    for (std::size_t r = 0; r < train.rows(); ++r) {
      const auto it = loo[j].stats.find(train.categories[j][r]);
      if (it == loo[j].stats.end()) {
        throw std::logic_error("transform_train: row is not part of the fitted training set");
      }
      const auto& [sum, count] = it->second;
      out.features(r, j) = count > 1 ? (sum - train.targets[r]) / static_cast<double>(count - 1)
                                     : loo[j].global_mean;
    }
  }
  return finish_transform(*this, std::move(out));
}

Dataset Preprocessor::transform(const Dataset& data) const {
  check_fitted(*this, data);
  Dataset out = data;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (kinds[j] != ColumnKind::kCategorical) continue;
    const Vector codes = loo_apply(loo[j], data.categories[j]);
    for (std::size_t r = 0; r < data.rows(); ++r) out.features(r, j) = codes[r];
  }
  return finish_transform(*this, std::move(out));
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("stratified_split: fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> valid_rows;
  auto take = [&](std::vector<std::size_t> group, std::size_t keep_min) {
    rng.shuffle(group);
    auto n_valid = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group.size())));
    n_valid = std::min(n_valid, group.size() - keep_min);
    valid_rows.insert(valid_rows.end(), group.begin(), group.begin() + n_valid);
    train_rows.insert(train_rows.end(), group.begin() + n_valid, group.end());
  };

  if (data.task.is_classification()) {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    const auto labels = data.labels();
    for (std::size_t r = 0; r < labels.size(); ++r) by_class[labels[r]].push_back(r);
    for (auto& [label, rows] : by_class) {
      if (rows.size() < 2) {
        throw std::invalid_argument("stratified_split: class " + std::to_string(label) +
                                    " has a single row");
      }
      take(std::move(rows), 1);
    }
  } else {
    std::vector<std::size_t> all(data.rows());
    std::iota(all.begin(), all.end(), 0);
    take(std::move(all), data.rows() > 0 ? 1 : 0);
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(valid_rows.begin(), valid_rows.end());
  return {data.subset(train_rows), data.subset(valid_rows)};
}

}  // namespace danet
