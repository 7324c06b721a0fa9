#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "danet/cli.hpp"
#include "danet/data.hpp"
#include "danet/entmax.hpp"
#include "danet/flops.hpp"
#include "danet/reparam.hpp"
#include "danet/serialize.hpp"

namespace danet::cli {
namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const char* metric_name(const Task& task) { return task.is_classification() ? "accuracy" : "mse"; }

std::vector<std::string> header_of(const std::filesystem::path& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw std::runtime_error(path.string() + ": missing header row");
  return rows.front();
}

// Loads `path` with the training-time schema and returns the model inputs in
// training column order.
Dataset load_for_model(const ModelFile& file, const std::filesystem::path& path) {
  const std::size_t expected = file.n_features();
  const std::vector<std::string> header = header_of(path);
  const Schema schema = file.data ? file.data->schema : Schema::default_for(header);
  if (file.data && header.size() != schema.columns.size()) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(schema.columns.size()) +
                             " columns (" + std::to_string(expected) + " features), got " +
                             std::to_string(header.size()));
  }
  Dataset raw = load_csv(path, schema, file.config().task.kind);
  if (raw.cols() != expected) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(expected) +
                             " features, got " + std::to_string(raw.cols()));
  }
  raw.task = file.config().task;
  if (!file.data) return raw;

  const auto& names = file.data->feature_names;
  if (!names.empty() && names != raw.feature_names) {
    std::vector<std::size_t> source(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto it = std::find(raw.feature_names.begin(), raw.feature_names.end(), names[j]);
      if (it == raw.feature_names.end()) {
        throw std::runtime_error(path.string() + ": missing feature '" + names[j] + "'");
      }
      source[j] = static_cast<std::size_t>(it - raw.feature_names.begin());
    }
    Dataset ordered = raw;
    for (std::size_t j = 0; j < names.size(); ++j) {
      ordered.feature_names[j] = raw.feature_names[source[j]];
      ordered.kinds[j] = raw.kinds[source[j]];
      ordered.categories[j] = raw.categories[source[j]];
      for (std::size_t r = 0; r < raw.rows(); ++r) ordered.features(r, j) = raw.features(r, source[j]);
    }
    raw = std::move(ordered);
  }
  return file.data->preprocessor.transform(raw);
}

double model_metric(const ModelFile& file, const Dataset& data) {
  return file.compressed() ? evaluate(file.compressed_model(), data) : evaluate(file.dense(), data);
}

std::vector<std::string> feature_names_of(const ModelFile& file) {
  if (file.data && !file.data->feature_names.empty()) return file.data->feature_names;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < file.n_features(); ++j) names.push_back("f" + std::to_string(j));
  return names;
}

void print_report(std::ostream& out, const char* label, const flops::Report& report) {
  for (const flops::Line& line : report.lines) {
    out << label << ' ' << line.name << ' ' << line.flops << '\n';
  }
  out << label << " total " << report.total() << '\n';
}

}  // namespace

TrainOutcome cmd_train(const RunConfig& config) {
  config.validate();
  const std::filesystem::path data_path = config.data;
  const Schema schema = config.schema.empty() ? Schema::default_for(header_of(data_path))
                                              : Schema::load(config.schema);
  Dataset full = load_csv(data_path, schema, config.model.task.kind);

  Dataset train_raw = full;
  Dataset valid_raw = full.subset(std::vector<std::size_t>{});
  if (config.valid_frac > 0.0) {
    std::tie(train_raw, valid_raw) = stratified_split(full, config.valid_frac, config.train.seed);
  }
  const Preprocessor pre = Preprocessor::fit(train_raw);
  const Dataset train = pre.transform_train(train_raw);
  const Dataset valid = pre.transform(valid_raw);

  DANetConfig model_config = config.model;
  model_config.task = full.task;
  model_config.ghost_size = config.train.ghost_size;
  DANetModel model = DANetModel::create(model_config, train.cols(), config.train.seed);
  const FitResult result = fit(model, train, valid, config.train);

  const std::filesystem::path out_dir = config.out;
  std::filesystem::create_directories(out_dir);
  TrainOutcome outcome;
  outcome.model_path = out_dir / "model.danet";
  outcome.epochs_run = result.history.size();
  const DataSpec spec{schema, full.feature_names, pre};
  save_model(outcome.model_path, model, &spec);
  write_history_csv(result.history, out_dir / "history.csv");

  const char* metric = metric_name(model.config.task);
  std::ostringstream line;
  line << "dataset=" << data_path.stem().string() << " depth=" << model_config.depth_abstlays
       << " k0=" << model_config.k0 << " d0=" << model_config.d0 << " d1=" << model_config.d1
       << " seed=" << config.train.seed << " epochs=" << outcome.epochs_run
       << " best_epoch=" << result.best_epoch << " train_" << metric << '='
       << fixed6(evaluate(model, pre.transform(train_raw)));
  if (valid.rows() > 0) line << " valid_" << metric << '=' << fixed6(evaluate(model, valid));
  if (!config.test_data.empty()) {
    ModelFile file{model, spec};
    line << " test_" << metric << '=' << fixed6(model_metric(file, load_for_model(file, config.test_data)));
  }
  outcome.summary = line.str();

  std::ofstream metrics(out_dir / "metrics.txt");
  if (!metrics) throw std::runtime_error("cannot write " + (out_dir / "metrics.txt").string());
  metrics << outcome.summary << '\n';
  return outcome;
}

std::string cmd_eval(const std::filesystem::path& model_path, const std::filesystem::path& data_path) {
  const ModelFile file = load_model(model_path);
  const Dataset data = load_for_model(file, data_path);
  return std::string(metric_name(file.config().task)) + "=" + fixed6(model_metric(file, data));
}

void cmd_compress(const std::filesystem::path& model_path, const std::filesystem::path& out_path,
                  std::ostream& out) {
  const ModelFile file = load_model(model_path);
  if (file.compressed()) throw std::runtime_error(model_path.string() + " is already compressed");
  const CompressedModel compressed = compress_model(file.dense());
  save_model(out_path, compressed, file.data ? &*file.data : nullptr);
  const flops::Count original = flops::count_flops(file.dense());
  const flops::Count reduced = flops::count_flops(compressed);
  out << "original_flops=" << original << " compressed_flops=" << reduced
      << " reduction_percent=" << fixed6(flops::reduction_percent(original, reduced)) << '\n';
}

void cmd_mask_report(const std::filesystem::path& model_path, const std::filesystem::path& out_path) {
  const ModelFile file = load_model(model_path);
  if (file.compressed()) {
    throw std::runtime_error(model_path.string() +
                             " is compressed; its masks were folded away, use the original model");
  }
  const DANetModel& model = file.dense();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path.string());
  out << "mask";
  for (const std::string& name : feature_names_of(file)) out << ',' << csv_escape(name);
  out << '\n';
  auto emit = [&](const std::string& label, const AbstractUnit& unit) {
    const EntmaxResult mask = entmax15_forward(unit.mask_logits);
    out << label;
    for (double p : mask.probs) out << ',' << format_double(p);
    out << '\n';
  };
  const auto& first = model.blocks.front().main1.units;
  for (std::size_t k = 0; k < first.size(); ++k) emit("block0.main1.unit" + std::to_string(k), first[k]);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const auto& units = model.blocks[b].shortcut.units;
    for (std::size_t k = 0; k < units.size(); ++k) {
      emit("block" + std::to_string(b) + ".shortcut.unit" + std::to_string(k), units[k]);
    }
  }
  if (!out) throw std::runtime_error("failed writing " + out_path.string());
}

void cmd_synth(int formula, std::size_t n, std::uint64_t seed, TaskKind task,
               const std::filesystem::path& out_path) {
  write_csv(synth_generate(formula, n, seed, task), out_path);
}

void cmd_flops(const std::filesystem::path& model_path, std::ostream& out) {
  const ModelFile file = load_model(model_path);
  if (file.compressed()) {
    print_report(out, "compressed", flops::report(file.compressed_model()));
    return;
  }
  const flops::Report original = flops::report(file.dense());
  const flops::Report reduced = flops::compressed_report(file.dense());
  print_report(out, "original", original);
  print_report(out, "compressed", reduced);
  out << "reduction_percent " << fixed6(flops::reduction_percent(original.total(), reduced.total()))
      << '\n';
}

}  // namespace danet::cli
