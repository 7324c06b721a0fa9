#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "danet/network.hpp"
#include "danet/training.hpp"

namespace danet::cli {

// Everything a `train` run needs. Defaults reproduce the reference DANet
// setting; a config file and then command-line flags override them.
struct RunConfig {
  DANetConfig model;
  TrainConfig train;
  std::string data;       // training CSV
  std::string schema;     // optional; default: last column is the target
  std::string test_data;  // optional held-out CSV scored after training
  std::string out = "danet-run";
  double valid_frac = 0.2;  // 0 trains on every row and selects on the training metric

  // Sets one field from its text form. Throws std::invalid_argument naming
  // the key if it is unknown or the value does not parse.
  void set(const std::string& key, const std::string& value);
  // Applies every `key = value` line; blank lines and `#` comments are skipped.
  void apply_text(const std::string& text);
  void apply_file(const std::filesystem::path& path);
  void validate() const;

  static const std::vector<std::string>& keys();
};

TaskKind parse_task(const std::string& text);

struct TrainOutcome {
  std::filesystem::path model_path;
  std::size_t epochs_run = 0;
  std::string summary;  // single line of space-separated key=value pairs
};

// Runs load -> split -> preprocess -> fit and writes model.danet, history.csv
// and metrics.txt into config.out.
TrainOutcome cmd_train(const RunConfig& config);

// Returns `accuracy=<v>` or `mse=<v>` with six decimals.
std::string cmd_eval(const std::filesystem::path& model_path, const std::filesystem::path& data_path);

void cmd_compress(const std::filesystem::path& model_path, const std::filesystem::path& out_path,
                  std::ostream& out);

void cmd_mask_report(const std::filesystem::path& model_path, const std::filesystem::path& out_path);

void cmd_synth(int formula, std::size_t n, std::uint64_t seed, TaskKind task,
               const std::filesystem::path& out_path);

void cmd_flops(const std::filesystem::path& model_path, std::ostream& out);

}  // namespace danet::cli
