#include "danet/flops.hpp"

namespace danet::flops {
namespace {

Count ceil_log2(std::size_t m) {
  Count bits = 0;
  while ((std::size_t{1} << bits) < m) ++bits;
  return bits;
}

Count head_flops(const MlpHead& head, std::vector<Line>& lines) {
  Count total = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Affine& a = head.layers[i];
    Count c = affine(a.out_dim(), a.in_dim());
    if (i < 2) c += a.out_dim();  // ReLU
    lines.push_back({"head." + std::to_string(i), c});
    total += c;
  }
  return total;
}

template <typename Layer, typename Fn>
void add_block_lines(std::size_t b, const Layer& main1, const Layer& main2, const Layer& shortcut,
                     Fn layer_flops, std::vector<Line>& lines) {
  const std::string p = "block" + std::to_string(b) + ".";
  lines.push_back({p + "main1", layer_flops(main1)});
  lines.push_back({p + "main2", layer_flops(main2)});
  lines.push_back({p + "shortcut", layer_flops(shortcut)});
  lines.push_back({p + "sum", main2.out_dim()});
}

}  // namespace

Count linear(std::size_t out, std::size_t in) { return 2 * Count(out) * in; }

Count affine(std::size_t out, std::size_t in) { return linear(out, in) + out; }

Count entmax(std::size_t m) { return Count(m) * ceil_log2(m) + 4 * Count(m) + 2 * Count(m); }

Count abstlay(std::size_t m, std::size_t d, std::size_t branches) {
  const Count unit = entmax(m) + m       // mask and f' = M (.) f
                     + 2 * linear(d, m)  // W1 f', W2 f'
                     + 2 * (2 * Count(d))  // two eval batch norms
                     + 3 * Count(d);     // sigmoid, gate product, ReLU
  return branches * unit + (branches - 1) * Count(d);
}

Count compressed_abstlay(std::size_t m, std::size_t d, std::size_t branches) {
  const Count unit = 2 * affine(d, m) + 3 * Count(d);
  return branches * unit + (branches - 1) * Count(d);
}

Count Report::total() const {
  Count t = 0;
  for (const Line& l : lines) t += l.flops;
  return t;
}

Report report(const DANetModel& model) {
  Report r;
  auto layer_flops = [](const AbstLay& l) { return abstlay(l.in_dim(), l.out_dim(), l.branches()); };
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const BasicBlock& blk = model.blocks[b];
    add_block_lines(b, blk.main1, blk.main2, blk.shortcut, layer_flops, r.lines);
  }
  head_flops(model.head, r.lines);
  return r;
}

Report report(const CompressedModel& model) {
  Report r;
  auto layer_flops = [](const CompressedAbstLay& l) {
    return compressed_abstlay(l.in_dim(), l.out_dim(), l.units.size());
  };
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const CompressedBlock& blk = model.blocks[b];
    add_block_lines(b, blk.main1, blk.main2, blk.shortcut, layer_flops, r.lines);
  }
  head_flops(model.head, r.lines);
  return r;
}

Report compressed_report(const DANetModel& model) {
  Report r;
  auto layer_flops = [](const AbstLay& l) {
    return compressed_abstlay(l.in_dim(), l.out_dim(), l.branches());
  };
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const BasicBlock& blk = model.blocks[b];
    add_block_lines(b, blk.main1, blk.main2, blk.shortcut, layer_flops, r.lines);
  }
  head_flops(model.head, r.lines);
  return r;
}

Count count_flops(const DANetModel& model) { return report(model).total(); }

Count count_flops(const CompressedModel& model) { return report(model).total(); }

double reduction_percent(Count original, Count compressed) {
  return (1.0 - static_cast<double>(compressed) / static_cast<double>(original)) * 100.0;
}

}  // namespace danet::flops
