#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "danet/network.hpp"
#include "danet/reparam.hpp"

// Floating-point operation counts for one single-row inference.
//
// Convention: every multiply and every add is one op, so a d x m matrix-vector
// product is 2*d*m and a bias add is d more. Eval-mode batch norm is 2 ops per
// feature (scale, shift). sigmoid, ReLU and exp are 1 op per element. Entmax
// over m inputs costs m*ceil(log2 m) for the sort, 4*m for the support scan
// (halve, running sum, running square sum, threshold test) and 2*m to emit
// the probabilities (subtract, square).
namespace danet::flops {

using Count = std::uint64_t;

Count linear(std::size_t out, std::size_t in);
Count affine(std::size_t out, std::size_t in);
Count entmax(std::size_t m);

// Eval-mode AbstLay with K branches, m inputs and d outputs.
Count abstlay(std::size_t m, std::size_t d, std::size_t branches);
// Re-parameterized AbstLay of the same shape.
Count compressed_abstlay(std::size_t m, std::size_t d, std::size_t branches);

struct Line {
  std::string name;
  Count flops;
};

struct Report {
  std::vector<Line> lines;
  Count total() const;
};

Report report(const DANetModel& model);
Report report(const CompressedModel& model);
// What report() would give after compressing `model`; needs no batch-norm statistics.
Report compressed_report(const DANetModel& model);

Count count_flops(const DANetModel& model);
Count count_flops(const CompressedModel& model);

// (1 - compressed / original) * 100
double reduction_percent(Count original, Count compressed);

}  // namespace danet::flops
