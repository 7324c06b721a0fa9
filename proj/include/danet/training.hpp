#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "danet/data.hpp"
#include "danet/network.hpp"
#include "danet/reparam.hpp"

namespace danet {

struct TrainConfig {
  std::size_t batch_size = 8192;
  std::size_t ghost_size = 256;
  double lr0 = 0.008;
  double decay_factor = 0.95;
  std::size_t decay_every = 20;  // epochs
  double weight_decay = 1e-5;
  double nu1 = 0.8;
  double nu2 = 1.0;
  double beta1 = 0.995;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 200;
  std::size_t patience = 30;  // epochs without validation improvement; 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // same shape as the prediction it was computed from
};

// Mean negative log-softmax of the true class.
LossResult cross_entropy(const Matrix& logits, std::span<const std::size_t> labels);

struct MseResult {
  double loss = 0.0;
  Vector grad;
};

MseResult mse(std::span<const double> pred, std::span<const double> target);

struct QhAdamState {
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::uint64_t step = 0;
};

struct QhAdamOptions {
  double nu1 = 0.8;
  double nu2 = 1.0;
  double beta1 = 0.995;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;

  static QhAdamOptions from(const TrainConfig& config);
};

// One quasi-hyperbolic Adam update. Decoupled weight decay shrinks only
// ParamKind::kWeight entries.
void qhadam_step(QhAdamState& state, const std::vector<ParamRef>& params,
                 const std::vector<ParamRef>& grads, const QhAdamOptions& options, double lr);

// lr0 * decay_factor^floor(epoch / decay_every)
double lr_at(std::size_t epoch, const TrainConfig& config);

struct HistoryRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double valid_metric = 0.0;
  bool operator==(const HistoryRow&) const = default;
};

struct FitResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
};

// Trains in place; on return `model` holds the best-validation parameters.
// An empty validation set selects on the training set instead.
FitResult fit(DANetModel& model, const Dataset& train, const Dataset& valid,
              const TrainConfig& config);

// Accuracy for classification, MSE for regression.
double evaluate(const DANetModel& model, const Dataset& data);
double evaluate(const CompressedModel& model, const Dataset& data);
double metric_from_predictions(const Task& task, const Predictions& predictions,
                               const Dataset& data);
bool metric_improves(const Task& task, double candidate, double incumbent);

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace danet
