#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "danet/layers.hpp"
#include "danet/numerics.hpp"

namespace danet {

enum class TaskKind { kClassification, kRegression };

struct Task {
  TaskKind kind = TaskKind::kClassification;
  std::size_t num_classes = 2;  // ignored for regression

  std::size_t output_dim() const { return kind == TaskKind::kClassification ? num_classes : 1; }
  bool is_classification() const { return kind == TaskKind::kClassification; }
  bool operator==(const Task&) const = default;
};

struct DANetConfig {
  std::size_t depth_abstlays = 8;  // main-path AbstLays; two per block
  std::size_t k0 = 5;              // branches per AbstLay
  std::size_t d0 = 32;             // block output width
  std::size_t d1 = 64;             // block hidden width
  double dropout_rate = 0.1;
  std::size_t head_hidden = 0;     // 0 selects 2 * d0
  std::size_t ghost_size = 256;
  Task task;

  // Preset for inputs with many raw features.
  static DANetConfig wide_input();

  std::size_t num_blocks() const { return depth_abstlays / 2; }
  std::size_t resolved_head_hidden() const { return head_hidden == 0 ? 2 * d0 : head_hidden; }
  void validate() const;
  bool operator==(const DANetConfig&) const = default;
};

struct BasicBlock {
  AbstLay main1;     // block input -> d1
  AbstLay main2;     // d1 -> d0
  AbstLay shortcut;  // raw features -> d0
  double dropout_rate = 0.0;

  bool operator==(const BasicBlock&) const = default;
};

struct Affine {
  Matrix weight;  // out x in
  Vector bias;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  bool operator==(const Affine&) const = default;
};

// Three affine layers with ReLU between them: d0 -> h -> h -> output.
struct MlpHead {
  std::array<Affine, 3> layers;

  bool operator==(const MlpHead&) const = default;
};

struct DANetModel {
  DANetConfig config;
  std::size_t n_features = 0;
  std::vector<BasicBlock> blocks;
  MlpHead head;

  // Fresh model with Glorot-uniform weights and zero mask logits.
  static DANetModel create(const DANetConfig& config, std::size_t n_features, std::uint64_t seed);

  void set_ghost_size(std::size_t ghost);
  bool operator==(const DANetModel&) const = default;
};

struct BlockContext {
  AbstLayContext main1;
  AbstLayContext main2;
  AbstLayContext shortcut;
  Matrix keep_scale;  // inverted-dropout multipliers (0 or 1/(1-rate)); empty when unused
};

struct HeadContext {
  std::array<Matrix, 3> inputs;  // input to each affine layer (post-ReLU for layers 1, 2)
};

struct ModelContext {
  Mode mode = Mode::kEval;
  std::vector<BlockContext> blocks;
  HeadContext head;
  bool consumed = false;
};

struct BlockGrads {
  AbstLayGrads main1;
  AbstLayGrads main2;
  AbstLayGrads shortcut;
};

struct AffineGrads {
  Matrix weight;
  Vector bias;
};

struct ModelGrads {
  std::vector<BlockGrads> blocks;
  std::array<AffineGrads, 3> head;
  Matrix input;  // gradient with respect to the raw features
};

ModelGrads zero_grads(const DANetModel& model);

struct BlockOutput {
  Matrix output;
  Matrix main;      // main-path contribution
  Matrix shortcut;  // shortcut contribution after dropout
};

BlockOutput block_forward(BasicBlock& block, const Matrix& f_prev, const Matrix& x_raw, Mode mode,
                          Rng& rng, BlockContext& ctx);
Matrix block_forward_eval(const BasicBlock& block, const Matrix& f_prev, const Matrix& x_raw);
// Returns d(loss)/d(f_prev); the shortcut's raw-input gradient is added to grad_raw.
Matrix block_backward(const BasicBlock& block, BlockContext& ctx, const Matrix& grad_out,
                      BlockGrads& grads, Matrix& grad_raw);

Matrix head_forward(const MlpHead& head, const Matrix& features, HeadContext* ctx);

// Logits (classification) or one score per row (regression).
Matrix danet_forward(DANetModel& model, const Matrix& x, Mode mode, Rng& rng, ModelContext& ctx);
Matrix danet_forward_eval(const DANetModel& model, const Matrix& x);
ModelGrads danet_backward(const DANetModel& model, ModelContext& ctx, const Matrix& grad_output);

struct Predictions {
  std::vector<std::size_t> labels;  // classification
  Vector scores;                    // regression
};

// Argmax of the logits (lowest index on ties) or the raw regression score.
Predictions predictions_from_output(const Task& task, const Matrix& output);
Predictions predict(const DANetModel& model, const Matrix& x);

enum class ParamKind { kWeight, kBias, kMaskLogits, kBnAffine };

struct ParamRef {
  std::string name;
  std::span<double> values;
  ParamKind kind;
};

// Every trainable parameter in a fixed order. The grads overload lists the
// matching gradient buffers in the same order.
std::vector<ParamRef> parameters(DANetModel& model);
std::vector<ParamRef> parameters(ModelGrads& grads);

}  // namespace danet
