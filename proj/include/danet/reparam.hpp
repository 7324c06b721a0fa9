#pragma once

#include <utility>
#include <vector>

#include "danet/network.hpp"

namespace danet {

// An AbstractUnit rewritten as two affine maps:
//   out = ReLU(sigmoid(w1s f + b1s) (.) (w2s f + b2s))
struct CompressedUnit {
  Matrix w1s;
  Vector b1s;
  Matrix w2s;
  Vector b2s;

  std::size_t in_dim() const { return w1s.cols(); }
  std::size_t out_dim() const { return w1s.rows(); }
  bool operator==(const CompressedUnit&) const = default;
};

struct CompressedAbstLay {
  std::vector<CompressedUnit> units;

  std::size_t in_dim() const { return units.front().in_dim(); }
  std::size_t out_dim() const { return units.front().out_dim(); }
  bool operator==(const CompressedAbstLay&) const = default;
};

struct CompressedBlock {
  CompressedAbstLay main1;
  CompressedAbstLay main2;
  CompressedAbstLay shortcut;
  bool operator==(const CompressedBlock&) const = default;
};

// Inference-only network; dropout is gone and every unit is affine.
struct CompressedModel {
  DANetConfig config;
  std::size_t n_features = 0;
  std::vector<CompressedBlock> blocks;
  MlpHead head;
  bool operator==(const CompressedModel&) const = default;
};

// Column j of w scaled by mask[j].
Matrix fold_mask(const Matrix& w, std::span<const double> mask);
// Row i scaled by gamma/sigma, bias beta - mu*gamma/sigma, sigma = sqrt(running_var + eps).
std::pair<Matrix, Vector> fold_bn(const Matrix& w_prime, const GhostBatchNorm& bn);

// Throws std::logic_error when either batch norm has no running statistics.
CompressedUnit compress_unit(const AbstractUnit& unit);
CompressedAbstLay compress_abstlay(const AbstLay& layer);
CompressedModel compress_model(const DANetModel& model);

Matrix compressed_unit_forward(const CompressedUnit& unit, const Matrix& f);
Matrix compressed_abstlay_forward(const CompressedAbstLay& layer, const Matrix& f);
Matrix compressed_forward(const CompressedModel& model, const Matrix& x);
Predictions predict(const CompressedModel& model, const Matrix& x);

}  // namespace danet
