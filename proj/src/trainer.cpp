#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "danet/training.hpp"

namespace danet {

void TrainConfig::validate() const {
  if (batch_size == 0 || ghost_size == 0) {
    throw std::invalid_argument("TrainConfig: batch and ghost sizes must be positive");
  }
  if (batch_size < ghost_size) {
    throw std::invalid_argument("TrainConfig: batch_size (" + std::to_string(batch_size) +
                                ") must be at least ghost_size (" + std::to_string(ghost_size) + ")");
  }
  if (!(lr0 > 0.0)) throw std::invalid_argument("TrainConfig: lr0 must be positive");
  if (decay_every == 0) throw std::invalid_argument("TrainConfig: decay_every must be positive");
}

namespace {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto from = src.row(rows[i]);
    std::copy(from.begin(), from.end(), out.row(i).begin());
  }
  return out;
}

LossResult batch_loss(const Task& task, const Matrix& output, const Dataset& data,
                      std::span<const std::size_t> rows) {
  if (task.is_classification()) {
    std::vector<std::size_t> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      labels[i] = static_cast<std::size_t>(data.targets[rows[i]]);
    }
    return cross_entropy(output, labels);
  }
  Vector pred(rows.size());
  Vector target(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pred[i] = output(i, 0);
    target[i] = data.targets[rows[i]];
  }
  MseResult m = mse(pred, target);
  return {m.loss, Matrix(rows.size(), 1, std::move(m.grad))};
}

}  // namespace

bool metric_improves(const Task& task, double candidate, double incumbent) {
  return task.is_classification() ? candidate > incumbent : candidate < incumbent;
}

FitResult fit(DANetModel& model, const Dataset& train, const Dataset& valid,
              const TrainConfig& config) {
  config.validate();
  if (train.rows() == 0) throw std::invalid_argument("fit: empty training set");
  if (train.cols() != model.n_features) {
    throw ShapeError("fit: training set has " + std::to_string(train.cols()) +
                     " features, model expects " + std::to_string(model.n_features));
  }
  model.set_ghost_size(config.ghost_size);
  const Task task = model.config.task;
  const Dataset& selection = valid.rows() > 0 ? valid : train;

  Rng rng(config.seed);
  QhAdamState state;
  const QhAdamOptions options = QhAdamOptions::from(config);
  const std::vector<ParamRef> params = parameters(model);

  FitResult result;
  DANetModel best = model;
  bool have_best = false;
  std::size_t stale = 0;
  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Matrix x = gather_rows(train.features, rows);

      ModelContext ctx;
      const Matrix output = danet_forward(model, x, Mode::kTrain, rng, ctx);
      LossResult loss = batch_loss(task, output, train, rows);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream msg;
        msg << "fit: non-finite loss at epoch " << epoch << " batch " << batch_index;
        throw std::runtime_error(msg.str());
      }
      loss_sum += loss.loss * static_cast<double>(rows.size());
      ModelGrads grads = danet_backward(model, ctx, loss.grad);
      qhadam_step(state, params, parameters(grads), options, lr);
    }

    const double metric = evaluate(model, selection);
    result.history.push_back(
        {epoch, lr, loss_sum / static_cast<double>(train.rows()), metric});
    if (!have_best || metric_improves(task, metric, result.best_metric)) {
      best = model;
      have_best = true;
      result.best_epoch = epoch;
      result.best_metric = metric;
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  if (have_best) model = std::move(best);
  return result;
}

double metric_from_predictions(const Task& task, const Predictions& predictions,
                               const Dataset& data) {
  const std::size_t n = data.rows();
  if (n == 0) return 0.0;
  if (task.is_classification()) {
    std::size_t correct = 0;
    for (std::size_t r = 0; r < n; ++r)
      if (predictions.labels[r] == static_cast<std::size_t>(data.targets[r])) ++correct;
    return static_cast<double>(correct) / static_cast<double>(n);
  }
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double diff = predictions.scores[r] - data.targets[r];
    total += diff * diff;
  }
  return total / static_cast<double>(n);
}

double evaluate(const DANetModel& model, const Dataset& data) {
  if (data.rows() == 0) return 0.0;
  return metric_from_predictions(model.config.task, predict(model, data.features), data);
}

double evaluate(const CompressedModel& model, const Dataset& data) {
  if (data.rows() == 0) return 0.0;
  return metric_from_predictions(model.config.task, predict(model, data.features), data);
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,lr,train_loss,valid_metric\n";
  for (const HistoryRow& h : history) {
    out << h.epoch << ',' << format_double(h.lr) << ',' << format_double(h.train_loss) << ','
        << format_double(h.valid_metric) << '\n';
  }
}

}  // namespace danet
