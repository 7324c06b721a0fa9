#include "danet/network.hpp"

#include <cmath>
#include <stdexcept>

namespace danet {

DANetConfig DANetConfig::wide_input() {
  DANetConfig c;
  c.k0 = 8;
  c.d0 = 48;
  c.d1 = 96;
  return c;
}

void DANetConfig::validate() const {
  if (depth_abstlays < 2 || depth_abstlays % 2 != 0) {
    throw std::invalid_argument("DANetConfig: depth must be a positive even number of AbstLays, got " +
                                std::to_string(depth_abstlays));
  }
  if (k0 == 0 || d0 == 0 || d1 == 0) throw std::invalid_argument("DANetConfig: k0, d0, d1 must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("DANetConfig: dropout rate must lie in [0, 1)");
  }
  if (ghost_size == 0) throw std::invalid_argument("DANetConfig: ghost size must be positive");
  if (task.is_classification() && task.num_classes < 2) {
    throw std::invalid_argument("DANetConfig: classification needs at least two classes");
  }
}

namespace {

Affine make_affine(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Affine a{Matrix(out, in), Vector(out, 0.0)};
  for (double& v : a.weight.values()) v = rng.uniform(-bound, bound);
  return a;
}

Matrix affine_forward(const Affine& layer, const Matrix& x) {
  Matrix y = matmul_nt(x, layer.weight);
  add_row_vector(y, layer.bias);
  return y;
}

void relu_in_place(Matrix& m) {
  for (double& v : m.values()) v = std::max(v, 0.0);
}

void check_model_input(const DANetModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw ShapeError("danet_forward: input " + x.shape_string() + " for a model over " +
                     std::to_string(model.n_features) + " features");
  }
  if (model.head.layers[2].out_dim() != model.config.task.output_dim()) {
    throw ShapeError("danet_forward: head emits " + std::to_string(model.head.layers[2].out_dim()) +
                     " values but the task needs " + std::to_string(model.config.task.output_dim()));
  }
}

Vector column_sums(const Matrix& m) {
  Vector s(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += m(r, j);
  return s;
}

}  // namespace

DANetModel DANetModel::create(const DANetConfig& config, std::size_t n_features,
                              std::uint64_t seed) {
  config.validate();
  if (n_features == 0) throw std::invalid_argument("DANetModel: no input features");
  Rng rng(seed);
  DANetModel model;
  model.config = config;
  model.n_features = n_features;
  for (std::size_t b = 0; b < config.num_blocks(); ++b) {
    const std::size_t in = b == 0 ? n_features : config.d0;
    BasicBlock block;
    block.main1 = AbstLay(in, config.d1, config.k0, rng, config.ghost_size);
    block.main2 = AbstLay(config.d1, config.d0, config.k0, rng, config.ghost_size);
    block.shortcut = AbstLay(n_features, config.d0, config.k0, rng, config.ghost_size);
    block.dropout_rate = config.dropout_rate;
    model.blocks.push_back(std::move(block));
  }
  const std::size_t h = config.resolved_head_hidden();
  model.head.layers[0] = make_affine(config.d0, h, rng);
  model.head.layers[1] = make_affine(h, h, rng);
  model.head.layers[2] = make_affine(h, config.task.output_dim(), rng);
  return model;
}

void DANetModel::set_ghost_size(std::size_t ghost) {
  if (ghost == 0) throw std::invalid_argument("ghost size must be positive");
  config.ghost_size = ghost;
  for (BasicBlock& b : blocks)
    for (AbstLay* layer : {&b.main1, &b.main2, &b.shortcut})
      for (AbstractUnit& u : layer->units) {
        u.bn1.ghost_size = ghost;
        u.bn2.ghost_size = ghost;
      }
}

BlockOutput block_forward(BasicBlock& block, const Matrix& f_prev, const Matrix& x_raw, Mode mode,
                          Rng& rng, BlockContext& ctx) {
  BlockOutput out;
  const Matrix hidden = abstlay_forward(block.main1, f_prev, mode, ctx.main1);
  out.main = abstlay_forward(block.main2, hidden, mode, ctx.main2);
  out.shortcut = abstlay_forward(block.shortcut, x_raw, mode, ctx.shortcut);
  ctx.keep_scale = Matrix();
  if (mode == Mode::kTrain && block.dropout_rate > 0.0) {
    const double keep = 1.0 / (1.0 - block.dropout_rate);
    ctx.keep_scale = Matrix(out.shortcut.rows(), out.shortcut.cols());
    for (double& s : ctx.keep_scale.values()) s = rng.uniform() < block.dropout_rate ? 0.0 : keep;
    out.shortcut = hadamard(out.shortcut, ctx.keep_scale);
  }
  out.output = add(out.main, out.shortcut);
  return out;
}

Matrix block_forward_eval(const BasicBlock& block, const Matrix& f_prev, const Matrix& x_raw) {
  Matrix out = abstlay_forward_eval(block.main2, abstlay_forward_eval(block.main1, f_prev));
  add_in_place(out, abstlay_forward_eval(block.shortcut, x_raw));
  return out;
}

Matrix block_backward(const BasicBlock& block, BlockContext& ctx, const Matrix& grad_out,
                      BlockGrads& grads, Matrix& grad_raw) {
  const Matrix grad_short =
      ctx.keep_scale.empty() ? grad_out : hadamard(grad_out, ctx.keep_scale);
  add_in_place(grad_raw, abstlay_backward(block.shortcut, ctx.shortcut, grad_short, grads.shortcut));
  const Matrix grad_hidden = abstlay_backward(block.main2, ctx.main2, grad_out, grads.main2);
  return abstlay_backward(block.main1, ctx.main1, grad_hidden, grads.main1);
}

Matrix head_forward(const MlpHead& head, const Matrix& features, HeadContext* ctx) {
  Matrix a = features;
  for (std::size_t i = 0; i < 3; ++i) {
    Matrix z = affine_forward(head.layers[i], a);
    if (ctx != nullptr) ctx->inputs[i] = std::move(a);
    if (i < 2) relu_in_place(z);
    a = std::move(z);
  }
  return a;
}

Matrix danet_forward(DANetModel& model, const Matrix& x, Mode mode, Rng& rng, ModelContext& ctx) {
  check_model_input(model, x);
  ctx.mode = mode;
  ctx.consumed = false;
  ctx.blocks.assign(model.blocks.size(), BlockContext{});
  Matrix f = x;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    f = block_forward(model.blocks[b], f, x, mode, rng, ctx.blocks[b]).output;
  }
  return head_forward(model.head, f, &ctx.head);
}

Matrix danet_forward_eval(const DANetModel& model, const Matrix& x) {
  check_model_input(model, x);
  Matrix f = x;
  for (const BasicBlock& block : model.blocks) f = block_forward_eval(block, f, x);
  return head_forward(model.head, f, nullptr);
}

ModelGrads zero_grads(const DANetModel& model) {
  ModelGrads g;
  for (const BasicBlock& b : model.blocks) {
    g.blocks.push_back({zero_grads(b.main1), zero_grads(b.main2), zero_grads(b.shortcut)});
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const Affine& a = model.head.layers[i];
    g.head[i] = {Matrix(a.out_dim(), a.in_dim()), Vector(a.out_dim(), 0.0)};
  }
  g.input = Matrix(0, model.n_features);
  return g;
}

ModelGrads danet_backward(const DANetModel& model, ModelContext& ctx, const Matrix& grad_output) {
  if (ctx.consumed) throw std::logic_error("danet_backward: context already consumed");
  if (ctx.mode != Mode::kTrain) {
    throw std::logic_error("danet_backward: context was not produced by a train-mode forward");
  }
  if (ctx.blocks.size() != model.blocks.size()) {
    throw std::logic_error("danet_backward: context does not match this model");
  }
  const Matrix& last_in = ctx.head.inputs[2];
  if (grad_output.rows() != last_in.rows() || grad_output.cols() != model.head.layers[2].out_dim()) {
    throw ShapeError("danet_backward: output gradient " + grad_output.shape_string());
  }
  ctx.consumed = true;

  ModelGrads grads = zero_grads(model);
  Matrix grad = grad_output;
  for (std::size_t i = 3; i-- > 0;) {
    const Matrix& input = ctx.head.inputs[i];
    grads.head[i].weight = matmul_tn(grad, input);
    grads.head[i].bias = column_sums(grad);
    grad = matmul(grad, model.head.layers[i].weight);
    if (i > 0) {
      // input[i] is ReLU(z_{i-1}); its zeros mark the inactive units.
      auto g = grad.values();
      auto a = input.values();
      for (std::size_t t = 0; t < g.size(); ++t)
        if (a[t] <= 0.0) g[t] = 0.0;
    }
  }

  grads.input = Matrix(grad.rows(), model.n_features);
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    grad = block_backward(model.blocks[b], ctx.blocks[b], grad, grads.blocks[b], grads.input);
  }
  add_in_place(grads.input, grad);
  return grads;
}

Predictions predictions_from_output(const Task& task, const Matrix& output) {
  Predictions p;
  if (task.is_classification()) {
    p.labels.resize(output.rows());
    for (std::size_t r = 0; r < output.rows(); ++r) {
      auto row = output.row(r);
      std::size_t best = 0;
      for (std::size_t c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = c;
      p.labels[r] = best;
    }
  } else {
    p.scores.resize(output.rows());
    for (std::size_t r = 0; r < output.rows(); ++r) p.scores[r] = output(r, 0);
  }
  return p;
}

Predictions predict(const DANetModel& model, const Matrix& x) {
  return predictions_from_output(model.config.task, danet_forward_eval(model, x));
}

namespace {

const char* const kLayerNames[3] = {"main1", "main2", "shortcut"};

std::string unit_prefix(std::size_t b, std::size_t layer, std::size_t k) {
  return "block" + std::to_string(b) + "." + kLayerNames[layer] + ".unit" + std::to_string(k) + ".";
}

}  // namespace

std::vector<ParamRef> parameters(DANetModel& model) {
  std::vector<ParamRef> out;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    AbstLay* layers[3] = {&model.blocks[b].main1, &model.blocks[b].main2, &model.blocks[b].shortcut};
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t k = 0; k < layers[l]->units.size(); ++k) {
        AbstractUnit& u = layers[l]->units[k];
        const std::string p = unit_prefix(b, l, k);
        out.push_back({p + "mask_logits", u.mask_logits, ParamKind::kMaskLogits});
        out.push_back({p + "w1", u.w1.values(), ParamKind::kWeight});
        out.push_back({p + "w2", u.w2.values(), ParamKind::kWeight});
        out.push_back({p + "bn1.gamma", u.bn1.gamma, ParamKind::kBnAffine});
        out.push_back({p + "bn1.beta", u.bn1.beta, ParamKind::kBnAffine});
        out.push_back({p + "bn2.gamma", u.bn2.gamma, ParamKind::kBnAffine});
        out.push_back({p + "bn2.beta", u.bn2.beta, ParamKind::kBnAffine});
      }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "head." + std::to_string(i) + ".";
    out.push_back({p + "weight", model.head.layers[i].weight.values(), ParamKind::kWeight});
    out.push_back({p + "bias", model.head.layers[i].bias, ParamKind::kBias});
  }
  return out;
}

std::vector<ParamRef> parameters(ModelGrads& grads) {
  std::vector<ParamRef> out;
  for (std::size_t b = 0; b < grads.blocks.size(); ++b) {
    AbstLayGrads* layers[3] = {&grads.blocks[b].main1, &grads.blocks[b].main2,
                               &grads.blocks[b].shortcut};
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t k = 0; k < layers[l]->units.size(); ++k) {
        UnitGrads& u = layers[l]->units[k];
        const std::string p = unit_prefix(b, l, k);
        out.push_back({p + "mask_logits", u.mask_logits, ParamKind::kMaskLogits});
        out.push_back({p + "w1", u.w1.values(), ParamKind::kWeight});
        out.push_back({p + "w2", u.w2.values(), ParamKind::kWeight});
        out.push_back({p + "bn1.gamma", u.bn1.gamma, ParamKind::kBnAffine});
        out.push_back({p + "bn1.beta", u.bn1.beta, ParamKind::kBnAffine});
        out.push_back({p + "bn2.gamma", u.bn2.gamma, ParamKind::kBnAffine});
        out.push_back({p + "bn2.beta", u.bn2.beta, ParamKind::kBnAffine});
      }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "head." + std::to_string(i) + ".";
    out.push_back({p + "weight", grads.head[i].weight.values(), ParamKind::kWeight});
    out.push_back({p + "bias", grads.head[i].bias, ParamKind::kBias});
  }
  return out;
}

}  // namespace danet
