#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "danet/entmax.hpp"
#include "danet/numerics.hpp"

namespace danet {

enum class Mode { kTrain, kEval };

// Per-call cache for GhostBatchNorm::backward.
struct BnContext {
  Matrix normalized;            // x_hat, batch x d
  std::vector<Vector> inv_std;  // one entry per ghost chunk
  std::size_t ghost_size = 0;
};

struct BnGrads {
  Vector gamma;
  Vector beta;
};

// Batch normalization over consecutive "ghost" chunks of the mini-batch.
// Affine parameters and running statistics are shared by all chunks.
struct GhostBatchNorm {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  std::size_t ghost_size = 256;
  double momentum = 0.01;
  double eps = 1e-5;
  // Set once running statistics hold real data (a train-mode update or a load).
  bool stats_ready = false;

  GhostBatchNorm() = default;
  explicit GhostBatchNorm(std::size_t dim, std::size_t ghost = 256);

  std::size_t dim() const { return gamma.size(); }

  // Normalizes each chunk by its own statistics and folds the mean of the
  // per-chunk statistics into the running estimates.
  Matrix forward_train(const Matrix& x, BnContext& ctx);
  Matrix forward_eval(const Matrix& x) const;
  Matrix backward(const BnContext& ctx, const Matrix& grad_y, BnGrads& grads) const;

  bool operator==(const GhostBatchNorm&) const = default;
};

// One (feature selection, feature abstracting) branch of an AbstLay.
struct AbstractUnit {
  Vector mask_logits;  // length m
  Matrix w1;           // d x m, attention gate weights
  Matrix w2;           // d x m, value weights
  GhostBatchNorm bn1;
  GhostBatchNorm bn2;

  AbstractUnit() = default;
  AbstractUnit(std::size_t in_dim, std::size_t out_dim, Rng& rng, std::size_t ghost = 256);

  std::size_t in_dim() const { return w1.cols(); }
  std::size_t out_dim() const { return w1.rows(); }

  bool operator==(const AbstractUnit&) const = default;
};

struct UnitGrads {
  Vector mask_logits;
  Matrix w1;
  Matrix w2;
  BnGrads bn1;
  BnGrads bn2;
};

struct UnitContext {
  Mode mode = Mode::kEval;
  EntmaxResult mask;
  Matrix input;    // f
  Matrix selected; // f' = M (.) f
  BnContext bn1;
  BnContext bn2;
  Matrix gate;     // q = sigmoid(BN1(W1 f'))
  Matrix value;    // BN2(W2 f')
  Matrix gated;    // q (.) value, before the ReLU
};

struct MaskOutput {
  EntmaxResult mask;
  Matrix selected;
};

// f' = entmax15(mask_logits) (.) f, the same mask applied to every row.
MaskOutput mask_forward(const AbstractUnit& unit, const Matrix& f);

// f* = ReLU(sigmoid(BN1(W1 f')) (.) BN2(W2 f')).
Matrix feature_abstract_forward(AbstractUnit& unit, const Matrix& selected, Mode mode,
                                UnitContext& ctx);

Matrix unit_forward(AbstractUnit& unit, const Matrix& f, Mode mode, UnitContext& ctx);
Matrix unit_forward_eval(const AbstractUnit& unit, const Matrix& f);
Matrix unit_backward(const AbstractUnit& unit, const UnitContext& ctx, const Matrix& grad_out,
                     UnitGrads& grads);

// K parallel AbstractUnits sharing (m, d); outputs are summed elementwise.
struct AbstLay {
  std::vector<AbstractUnit> units;

  AbstLay() = default;
  AbstLay(std::size_t in_dim, std::size_t out_dim, std::size_t branches, Rng& rng,
          std::size_t ghost = 256);

  std::size_t in_dim() const { return units.front().in_dim(); }
  std::size_t out_dim() const { return units.front().out_dim(); }
  std::size_t branches() const { return units.size(); }

  bool operator==(const AbstLay&) const = default;
};

struct AbstLayGrads {
  std::vector<UnitGrads> units;
};

struct AbstLayContext {
  std::vector<UnitContext> units;
  Mode mode = Mode::kEval;
  bool consumed = false;
};

AbstLayGrads zero_grads(const AbstLay& layer);

Matrix abstlay_forward(AbstLay& layer, const Matrix& f, Mode mode, AbstLayContext& ctx);
Matrix abstlay_forward_eval(const AbstLay& layer, const Matrix& f);
// Accumulates parameter gradients into `grads` and returns d(loss)/d(f).
// The context must come from a train-mode forward and is marked consumed.
Matrix abstlay_backward(const AbstLay& layer, AbstLayContext& ctx, const Matrix& grad_out,
                        AbstLayGrads& grads);

}  // namespace danet
