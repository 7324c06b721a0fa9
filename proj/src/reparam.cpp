#include "danet/reparam.hpp"

#include <cmath>
#include <stdexcept>

namespace danet {

Matrix fold_mask(const Matrix& w, std::span<const double> mask) {
  if (mask.size() != w.cols()) {
    throw ShapeError("fold_mask: weights " + w.shape_string() + " with mask of length " +
                     std::to_string(mask.size()));
  }
  return scale_columns(w, mask);
}

std::pair<Matrix, Vector> fold_bn(const Matrix& w_prime, const GhostBatchNorm& bn) {
  if (w_prime.rows() != bn.dim()) {
    throw ShapeError("fold_bn: weights " + w_prime.shape_string() + " with batch norm of width " +
                     std::to_string(bn.dim()));
  }
  Matrix w_star = w_prime;
  Vector b_star(bn.dim());
  for (std::size_t i = 0; i < bn.dim(); ++i) {
    const double sigma = std::sqrt(bn.running_var[i] + bn.eps);
    const double scale = bn.gamma[i] / sigma;
    for (double& v : w_star.row(i)) v *= scale;
    b_star[i] = bn.beta[i] - bn.running_mean[i] * bn.gamma[i] / sigma;
  }
  return {std::move(w_star), std::move(b_star)};
}

CompressedUnit compress_unit(const AbstractUnit& unit) {
  if (!unit.bn1.stats_ready || !unit.bn2.stats_ready) {
    throw std::logic_error(
        "compress_unit: batch-norm running statistics were never populated; train or load the "
        "model first");
  }
  const EntmaxResult mask = entmax15_forward(unit.mask_logits);
  CompressedUnit out;
  std::tie(out.w1s, out.b1s) = fold_bn(fold_mask(unit.w1, mask.probs), unit.bn1);
  std::tie(out.w2s, out.b2s) = fold_bn(fold_mask(unit.w2, mask.probs), unit.bn2);
  return out;
}

CompressedAbstLay compress_abstlay(const AbstLay& layer) {
  CompressedAbstLay out;
  for (const AbstractUnit& u : layer.units) out.units.push_back(compress_unit(u));
  return out;
}

CompressedModel compress_model(const DANetModel& model) {
  CompressedModel out;
  out.config = model.config;
  out.n_features = model.n_features;
  for (const BasicBlock& b : model.blocks) {
    out.blocks.push_back(
        {compress_abstlay(b.main1), compress_abstlay(b.main2), compress_abstlay(b.shortcut)});
  }
  out.head = model.head;
  return out;
}

Matrix compressed_unit_forward(const CompressedUnit& unit, const Matrix& f) {
  if (f.cols() != unit.in_dim()) {
    throw ShapeError("compressed_unit_forward: input " + f.shape_string() + " for unit of width " +
                     std::to_string(unit.in_dim()));
  }
  Matrix gate = matmul_nt(f, unit.w1s);
  add_row_vector(gate, unit.b1s);
  Matrix value = matmul_nt(f, unit.w2s);
  add_row_vector(value, unit.b2s);
  auto g = gate.values();
  auto v = value.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::max(sigmoid(g[i]) * v[i], 0.0);
  return gate;
}

Matrix compressed_abstlay_forward(const CompressedAbstLay& layer, const Matrix& f) {
  Matrix out = compressed_unit_forward(layer.units.front(), f);
  for (std::size_t k = 1; k < layer.units.size(); ++k)
    add_in_place(out, compressed_unit_forward(layer.units[k], f));
  return out;
}

Matrix compressed_forward(const CompressedModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw ShapeError("compressed_forward: input " + x.shape_string() + " for a model over " +
                     std::to_string(model.n_features) + " features");
  }
  Matrix f = x;
  for (const CompressedBlock& b : model.blocks) {
    Matrix next = compressed_abstlay_forward(b.main2, compressed_abstlay_forward(b.main1, f));
    add_in_place(next, compressed_abstlay_forward(b.shortcut, x));
    f = std::move(next);
  }
  return head_forward(model.head, f, nullptr);
}

Predictions predict(const CompressedModel& model, const Matrix& x) {
  return predictions_from_output(model.config.task, compressed_forward(model, x));
}

}  // namespace danet
