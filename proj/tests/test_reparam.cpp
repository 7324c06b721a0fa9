#include <doctest.h>

#include <cmath>

#include "danet/flops.hpp"
#include "danet/reparam.hpp"
#include "danet/serialize.hpp"
#include "support/gradcheck.hpp"

using namespace danet;
using danet::testing::random_matrix;

namespace {

void randomize_unit(AbstractUnit& u, Rng& rng) {
  for (double& v : u.mask_logits) v = rng.normal();
  for (GhostBatchNorm* bn : {&u.bn1, &u.bn2}) {
    for (double& v : bn->gamma) v = 1.0 + 0.5 * rng.normal();
    for (double& v : bn->beta) v = 0.5 * rng.normal();
    for (double& v : bn->running_mean) v = 0.5 * rng.normal();
    for (double& v : bn->running_var) v = rng.uniform(0.05, 2.0);
    bn->stats_ready = true;
  }
}

// Trains `model` for a few steps so every batch norm has real statistics.
void warm_up(DANetModel& model, Rng& rng, std::size_t steps) {
  for (std::size_t s = 0; s < steps; ++s) {
    ModelContext ctx;
    danet_forward(model, random_matrix(rng, 32, model.n_features), Mode::kTrain, rng, ctx);
  }
  for (ParamRef& p : parameters(model))
    for (double& v : p.values) v += 0.1 * rng.normal();
}

}  // namespace

TEST_CASE("fold_mask: uniform mask divides by m, one-hot keeps one column") {
  Rng rng(1);
  const Matrix w = random_matrix(rng, 3, 4);
  const Matrix folded = fold_mask(w, Vector(4, 0.25));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(folded.values()[i] == w.values()[i] * 0.25);
  const Matrix onehot = fold_mask(w, Vector{0, 0, 1, 0});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(onehot(r, c) == (c == 2 ? w(r, c) : 0.0));
  CHECK_THROWS_AS(fold_mask(w, Vector(3, 1.0)), ShapeError);
}

TEST_CASE("fold_mask is the substitution W(M . x)") {
  Rng rng(2);
  const Matrix w = random_matrix(rng, 5, 6);
  const Vector mask = entmax15_forward(gaussian_sample(rng, 6)).probs;
  const Matrix x = random_matrix(rng, 4, 6);
  CHECK(max_abs_diff(matmul_nt(x, fold_mask(w, mask)), matmul_nt(scale_columns(x, mask), w)) <= 1e-14);
}

TEST_CASE("fold_bn trivial cases") {
  Rng rng(3);
  const Matrix w = random_matrix(rng, 3, 2);
  GhostBatchNorm bn(3);
  bn.running_var.assign(3, 1.0 - bn.eps);
  auto [ws, bs] = fold_bn(w, bn);
  CHECK(max_abs_diff(ws, w) <= 1e-15);
  for (double b : bs) CHECK(b == 0.0);

  GhostBatchNorm zero(3);
  zero.gamma.assign(3, 0.0);
  zero.beta = {1, 2, 3};
  zero.running_mean = {5, 5, 5};
  auto [wz, bz] = fold_bn(w, zero);
  for (double v : wz.values()) CHECK(v == 0.0);
  CHECK(bz == Vector{1, 2, 3});
}

TEST_CASE("fold_bn matches the eval batch-norm formula") {
  Rng rng(4);
  const Matrix w = random_matrix(rng, 4, 5);
  GhostBatchNorm bn(4);
  for (double& v : bn.gamma) v = rng.normal();
  for (double& v : bn.beta) v = rng.normal();
  for (double& v : bn.running_mean) v = rng.normal();
  for (double& v : bn.running_var) v = rng.uniform(0.1, 3);
  const auto [ws, bs] = fold_bn(w, bn);
  const Matrix x = random_matrix(rng, 7, 5);
  Matrix folded = matmul_nt(x, ws);
  add_row_vector(folded, bs);
  CHECK(max_abs_diff(folded, bn.forward_eval(matmul_nt(x, w))) <= 1e-13);
}

TEST_CASE("identity statistics and uniform mask give W/m and zero bias") {
  Rng rng(5);
  AbstractUnit u(4, 3, rng);
  for (GhostBatchNorm* bn : {&u.bn1, &u.bn2}) {
    bn->running_var.assign(3, 1.0 - bn->eps);
    bn->stats_ready = true;
  }
  const CompressedUnit c = compress_unit(u);
  CHECK(max_abs_diff(c.w1s, fold_mask(u.w1, Vector(4, 0.25))) <= 1e-15);
  CHECK(max_abs_diff(c.w2s, fold_mask(u.w2, Vector(4, 0.25))) <= 1e-15);
  for (double b : c.b1s) CHECK(b == 0.0);
  for (double b : c.b2s) CHECK(b == 0.0);
}

TEST_CASE("compressed unit equals its own affine definition") {
  Rng rng(6);
  AbstractUnit u(5, 3, rng);
  randomize_unit(u, rng);
  const CompressedUnit c = compress_unit(u);
  const Matrix f = random_matrix(rng, 6, 5);
  Matrix a = matmul_nt(f, c.w1s), b = matmul_nt(f, c.w2s);
  add_row_vector(a, c.b1s);
  add_row_vector(b, c.b2s);
  Matrix expected(6, 3);
  for (std::size_t i = 0; i < expected.size(); ++i)
    expected.values()[i] = std::max(sigmoid(a.values()[i]) * b.values()[i], 0.0);
  CHECK(compressed_unit_forward(c, f) == expected);
}

TEST_CASE("compressed unit equals eval forward on 1000 inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    AbstractUnit u(2 + rng.below(10), 1 + rng.below(8), rng);
    randomize_unit(u, rng);
    const Matrix f = random_matrix(rng, 1000, u.in_dim(), 2.0);
    CHECK(max_abs_diff(compressed_unit_forward(compress_unit(u), f), unit_forward_eval(u, f)) <= 1e-10);
  }
}

TEST_CASE("untrained batch norms cannot be compressed") {
  Rng rng(8);
  AbstractUnit u(3, 2, rng);
  CHECK_THROWS_AS(compress_unit(u), std::logic_error);
  const DANetModel fresh = DANetModel::create(DANetConfig{}, 4, 0);
  CHECK_THROWS_AS(compress_model(fresh), std::logic_error);
}

TEST_CASE("mask zeros become exactly-zero weight columns") {
  Rng rng(9);
  AbstractUnit u(5, 3, rng);
  randomize_unit(u, rng);
  u.mask_logits = {3, -4, 2, -5, 2.5};
  const Vector mask = entmax15_forward(u.mask_logits).probs;
  REQUIRE(mask[1] == 0.0);
  REQUIRE(mask[3] == 0.0);
  const CompressedUnit c = compress_unit(u);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j : {1u, 3u}) {
      CHECK(c.w1s(r, j) == 0.0);
      CHECK(c.w2s(r, j) == 0.0);
    }
}

TEST_CASE("zero input through a zero-bias compressed unit is zero") {
  CompressedUnit c{Matrix(2, 3, 1.0), Vector(2, 0.0), Matrix(2, 3, 1.0), Vector(2, 0.0)};
  const Matrix out = compressed_unit_forward(c, Matrix(4, 3));
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("compressed DANet matches the eval forward") {
  Rng rng(10);
  for (std::size_t depth : {2u, 4u}) {
    DANetConfig cfg;
    cfg.depth_abstlays = depth;
    cfg.k0 = 3;
    cfg.d0 = 8;
    cfg.d1 = 12;
    cfg.ghost_size = 16;
    cfg.task = Task{TaskKind::kClassification, 3};
    DANetModel model = DANetModel::create(cfg, 7, depth);
    warm_up(model, rng, 3);
    const CompressedModel compressed = compress_model(model);
    const Matrix x = random_matrix(rng, 1000, 7);
    CHECK(max_abs_diff(compressed_forward(compressed, x), danet_forward_eval(model, x)) <= 1e-10);
    CHECK(compressed.head == model.head);
    CHECK(compressed.blocks.size() == model.blocks.size());
    CHECK(flops::count_flops(compressed) < flops::count_flops(model));
    CHECK(flops::count_flops(compressed) == flops::compressed_report(model).total());
    CHECK(predict(compressed, x).labels == predict(model, x).labels);
  }
}

TEST_CASE("compressed model serialization round-trip is bit-exact") {
  Rng rng(11);
  DANetConfig cfg;
  cfg.depth_abstlays = 2;
  cfg.k0 = 2;
  cfg.d0 = 4;
  cfg.d1 = 5;
  cfg.ghost_size = 8;
  DANetModel model = DANetModel::create(cfg, 3, 1);
  warm_up(model, rng, 2);
  const CompressedModel compressed = compress_model(model);
  const ModelFile back = deserialize_model(serialize_model(compressed));
  REQUIRE(back.compressed());
  CHECK(back.compressed_model() == compressed);
}

TEST_CASE("compression shrinks the stored parameter count per unit") {
  Rng rng(12);
  AbstractUnit u(6, 4, rng);
  randomize_unit(u, rng);
  const CompressedUnit c = compress_unit(u);
  const std::size_t compressed_count = c.w1s.size() + c.w2s.size() + c.b1s.size() + c.b2s.size();
  const std::size_t original = u.mask_logits.size() + u.w1.size() + u.w2.size() + 4 * 4 + 4 * 4;
  CHECK(compressed_count == 2 * 4 * 6 + 2 * 4);
  CHECK(compressed_count < original);
}
