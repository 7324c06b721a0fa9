#include <cmath>
#include <stdexcept>

#include "danet/layers.hpp"

namespace danet {
namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
  return w;
}

void check_input(const AbstractUnit& unit, const Matrix& f, const char* what) {
  if (f.cols() != unit.in_dim()) {
    throw ShapeError(std::string(what) + ": input " + f.shape_string() + " for unit of width " +
                     std::to_string(unit.in_dim()) + " -> " + std::to_string(unit.out_dim()));
  }
}

}  // namespace

AbstractUnit::AbstractUnit(std::size_t in_dim, std::size_t out_dim, Rng& rng, std::size_t ghost)
    : mask_logits(in_dim, 0.0),
      w1(glorot_uniform(out_dim, in_dim, rng)),
      w2(glorot_uniform(out_dim, in_dim, rng)),
      bn1(out_dim, ghost),
      bn2(out_dim, ghost) {
  if (in_dim == 0 || out_dim == 0) throw std::invalid_argument("AbstractUnit: zero width");
}

MaskOutput mask_forward(const AbstractUnit& unit, const Matrix& f) {
  check_input(unit, f, "mask_forward");
  MaskOutput out;
  out.mask = entmax15_forward(unit.mask_logits);
  out.selected = scale_columns(f, out.mask.probs);
  return out;
}

Matrix feature_abstract_forward(AbstractUnit& unit, const Matrix& selected, Mode mode,
                                UnitContext& ctx) {
  check_input(unit, selected, "feature_abstract_forward");
  const Matrix pre1 = matmul_nt(selected, unit.w1);
  const Matrix pre2 = matmul_nt(selected, unit.w2);
  Matrix norm1;
  Matrix norm2;
  if (mode == Mode::kTrain) {
    norm1 = unit.bn1.forward_train(pre1, ctx.bn1);
    norm2 = unit.bn2.forward_train(pre2, ctx.bn2);
  } else {
    norm1 = unit.bn1.forward_eval(pre1);
    norm2 = unit.bn2.forward_eval(pre2);
  }

  Matrix gate = std::move(norm1);
  for (double& v : gate.values()) v = sigmoid(v);
  Matrix gated = hadamard(gate, norm2);
  Matrix out = gated;
  for (double& v : out.values()) v = std::max(v, 0.0);

  ctx.mode = mode;
  ctx.gate = std::move(gate);
  ctx.value = std::move(norm2);
  ctx.gated = std::move(gated);
  return out;
}

Matrix unit_forward(AbstractUnit& unit, const Matrix& f, Mode mode, UnitContext& ctx) {
  MaskOutput sel = mask_forward(unit, f);
  Matrix out = feature_abstract_forward(unit, sel.selected, mode, ctx);
  ctx.mask = std::move(sel.mask);
  ctx.input = f;
  ctx.selected = std::move(sel.selected);
  return out;
}

Matrix unit_forward_eval(const AbstractUnit& unit, const Matrix& f) {
  const MaskOutput sel = mask_forward(unit, f);
  Matrix gate = unit.bn1.forward_eval(matmul_nt(sel.selected, unit.w1));
  const Matrix value = unit.bn2.forward_eval(matmul_nt(sel.selected, unit.w2));
  auto g = gate.values();
  auto v = value.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::max(sigmoid(g[i]) * v[i], 0.0);
  return gate;
}

Matrix unit_backward(const AbstractUnit& unit, const UnitContext& ctx, const Matrix& grad_out,
                     UnitGrads& grads) {
  if (ctx.mode != Mode::kTrain) {
    throw std::logic_error("unit_backward: context was not produced by a train-mode forward");
  }
  require_same_shape(ctx.gated, grad_out, "unit_backward");
  const std::size_t n = grad_out.rows();
  const std::size_t d = unit.out_dim();
  const std::size_t m = unit.in_dim();

  Matrix grad_gate_pre(n, d);  // d loss / d BN1 output
  Matrix grad_value(n, d);     // d loss / d BN2 output
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double g = ctx.gated(r, j) > 0.0 ? grad_out(r, j) : 0.0;
      const double q = ctx.gate(r, j);
      grad_value(r, j) = g * q;
      grad_gate_pre(r, j) = g * ctx.value(r, j) * q * (1.0 - q);
    }

  const Matrix grad_pre1 = unit.bn1.backward(ctx.bn1, grad_gate_pre, grads.bn1);
  const Matrix grad_pre2 = unit.bn2.backward(ctx.bn2, grad_value, grads.bn2);

  if (grads.w1.rows() != d || grads.w1.cols() != m) grads.w1 = Matrix(d, m);
  if (grads.w2.rows() != d || grads.w2.cols() != m) grads.w2 = Matrix(d, m);
  add_in_place(grads.w1, matmul_tn(grad_pre1, ctx.selected));
  add_in_place(grads.w2, matmul_tn(grad_pre2, ctx.selected));

  Matrix grad_selected = matmul(grad_pre1, unit.w1);
  add_in_place(grad_selected, matmul(grad_pre2, unit.w2));

  Vector grad_mask(m, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < m; ++j) grad_mask[j] += grad_selected(r, j) * ctx.input(r, j);
  const Vector grad_logits = entmax15_backward(ctx.mask, grad_mask);
  if (grads.mask_logits.size() != m) grads.mask_logits.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) grads.mask_logits[j] += grad_logits[j];

  return scale_columns(grad_selected, ctx.mask.probs);
}

AbstLay::AbstLay(std::size_t in_dim, std::size_t out_dim, std::size_t branches, Rng& rng,
                 std::size_t ghost) {
  if (branches == 0) throw std::invalid_argument("AbstLay: at least one branch required");
  units.reserve(branches);
  for (std::size_t k = 0; k < branches; ++k) units.emplace_back(in_dim, out_dim, rng, ghost);
}

AbstLayGrads zero_grads(const AbstLay& layer) {
  AbstLayGrads grads;
  for (const AbstractUnit& u : layer.units) {
    UnitGrads g;
    g.mask_logits.assign(u.in_dim(), 0.0);
    g.w1 = Matrix(u.out_dim(), u.in_dim());
    g.w2 = Matrix(u.out_dim(), u.in_dim());
    g.bn1 = {Vector(u.out_dim(), 0.0), Vector(u.out_dim(), 0.0)};
    g.bn2 = {Vector(u.out_dim(), 0.0), Vector(u.out_dim(), 0.0)};
    grads.units.push_back(std::move(g));
  }
  return grads;
}

Matrix abstlay_forward(AbstLay& layer, const Matrix& f, Mode mode, AbstLayContext& ctx) {
  ctx.units.assign(layer.units.size(), UnitContext{});
  ctx.mode = mode;
  ctx.consumed = false;
  Matrix out;
  for (std::size_t k = 0; k < layer.units.size(); ++k) {
    Matrix branch = unit_forward(layer.units[k], f, mode, ctx.units[k]);
    if (k == 0) {
      out = std::move(branch);
    } else {
      add_in_place(out, branch);
    }
  }
  return out;
}

Matrix abstlay_forward_eval(const AbstLay& layer, const Matrix& f) {
  Matrix out = unit_forward_eval(layer.units.front(), f);
  for (std::size_t k = 1; k < layer.units.size(); ++k)
    add_in_place(out, unit_forward_eval(layer.units[k], f));
  return out;
}

Matrix abstlay_backward(const AbstLay& layer, AbstLayContext& ctx, const Matrix& grad_out,
                        AbstLayGrads& grads) {
  if (ctx.consumed) throw std::logic_error("abstlay_backward: context already consumed");
  if (ctx.mode != Mode::kTrain) {
    throw std::logic_error("abstlay_backward: context was not produced by a train-mode forward");
  }
  if (ctx.units.size() != layer.units.size()) {
    throw std::logic_error("abstlay_backward: context does not match this layer");
  }
  if (grads.units.size() != layer.units.size()) grads = zero_grads(layer);
  ctx.consumed = true;

  Matrix grad_in;
  for (std::size_t k = 0; k < layer.units.size(); ++k) {
    Matrix g = unit_backward(layer.units[k], ctx.units[k], grad_out, grads.units[k]);
    if (k == 0) {
      grad_in = std::move(g);
    } else {
      add_in_place(grad_in, g);
    }
  }
  return grad_in;
}

}  // namespace danet
