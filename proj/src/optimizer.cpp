#include <cmath>
#include <stdexcept>

#include "danet/training.hpp"

namespace danet {

QhAdamOptions QhAdamOptions::from(const TrainConfig& config) {
  return {config.nu1, config.nu2, config.beta1, config.beta2, config.adam_eps, config.weight_decay};
}

void qhadam_step(QhAdamState& state, const std::vector<ParamRef>& params,
                 const std::vector<ParamRef>& grads, const QhAdamOptions& options, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("qhadam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const ParamRef& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("qhadam_step: optimizer state tracks a different parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  const double shrink = 1.0 - lr * options.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> theta = params[i].values;
    std::span<const double> g = grads[i].values;
    Vector& m1 = state.first_moment[i];
    Vector& m2 = state.second_moment[i];
    if (g.size() != theta.size() || m1.size() != theta.size()) {
      throw ShapeError("qhadam_step: gradient for " + params[i].name + " has the wrong length");
    }
    const bool decay = params[i].kind == ParamKind::kWeight && options.weight_decay != 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m1[j] = options.beta1 * m1[j] + (1.0 - options.beta1) * g[j];
      m2[j] = options.beta2 * m2[j] + (1.0 - options.beta2) * g[j] * g[j];
      const double m1_hat = m1[j] / correction1;
      const double m2_hat = m2[j] / correction2;
      const double num = (1.0 - options.nu1) * g[j] + options.nu1 * m1_hat;
      const double den = std::sqrt((1.0 - options.nu2) * g[j] * g[j] + options.nu2 * m2_hat) +
                         options.eps;
      if (decay) theta[j] *= shrink;
      theta[j] -= lr * num / den;
    }
  }
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  const auto steps = static_cast<double>(epoch / config.decay_every);
  return config.lr0 * std::pow(config.decay_factor, steps);
}

}  // namespace danet
