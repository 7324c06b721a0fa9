#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "danet/cli.hpp"

namespace {

struct Overrides {
  std::string config;
  std::vector<std::string> settings;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> depth, k0, d0, d1;
  std::optional<double> dropout;
  std::optional<std::string> task, data, schema, out;
};

danet::cli::RunConfig resolve(const Overrides& o) {
  danet::cli::RunConfig rc;
  if (!o.config.empty()) rc.apply_file(o.config);
  for (const std::string& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  auto put = [&rc](const char* key, const auto& value) {
    if (value) rc.set(key, std::to_string(*value));
  };
  put("seed", o.seed);
  put("depth", o.depth);
  put("k0", o.k0);
  put("d0", o.d0);
  put("d1", o.d1);
  if (o.dropout) rc.model.dropout_rate = *o.dropout;
  if (o.task) rc.set("task", *o.task);
  if (o.data) rc.set("data", *o.data);
  if (o.schema) rc.set("schema", *o.schema);
  if (o.out) rc.set("out", *o.out);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DANet: deep abstract networks for tabular data"};
  app.require_subcommand(1);

  Overrides o;
  auto* train = app.add_subcommand("train", "Fit a model and write model.danet, history.csv, metrics.txt");
  train->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("--set", o.settings, "Override any config key (key=value), repeatable");
  train->add_option("--seed", o.seed);
  train->add_option("--depth", o.depth, "Number of AbstLays on the main path (even)");
  train->add_option("--k0", o.k0, "Branches per AbstLay");
  train->add_option("--d0", o.d0);
  train->add_option("--d1", o.d1);
  train->add_option("--dropout", o.dropout, "Shortcut dropout rate");
  train->add_option("--task", o.task, "class or rank");
  train->add_option("--data", o.data, "Training CSV");
  train->add_option("--schema", o.schema, "Column roles file");
  train->add_option("--out", o.out, "Output directory");
  for (CLI::Option* opt : train->get_options())
    if (opt->get_name() != "--set" && opt->get_name() != "--help") {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }

  std::string model_path, data_path, out_path;
  auto* eval = app.add_subcommand("eval", "Score a model on a CSV");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", data_path)->required();

  auto* compress = app.add_subcommand("compress", "Fold masks and batch norms into affine layers");
  compress->add_option("--model", model_path)->required();
  compress->add_option("--out", out_path)->required();

  auto* mask = app.add_subcommand("mask-report", "Write raw-feature mask activations as CSV");
  mask->add_option("--model", model_path)->required();
  mask->add_option("--out", out_path)->required();

  int formula = 1;
  std::size_t n = 7000;
  std::uint64_t seed = 0;
  std::string task = "rank";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--formula", formula, "1-4")->required();
  synth->add_option("--n", n, "Rows");
  synth->add_option("--seed", seed);
  synth->add_option("--task", task, "class or rank");
  synth->add_option("--out", out_path)->required();

  auto* flops = app.add_subcommand("flops", "Per-layer FLOPS of a model");
  flops->add_option("--model", model_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto outcome = danet::cli::cmd_train(resolve(o));
      std::cout << outcome.summary << '\n';
    } else if (*eval) {
      std::cout << danet::cli::cmd_eval(model_path, data_path) << '\n';
    } else if (*compress) {
      danet::cli::cmd_compress(model_path, out_path, std::cout);
    } else if (*mask) {
      danet::cli::cmd_mask_report(model_path, out_path);
    } else if (*synth) {
      danet::cli::cmd_synth(formula, n, seed, danet::cli::parse_task(task), out_path);
    } else if (*flops) {
      danet::cli::cmd_flops(model_path, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "danet: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
