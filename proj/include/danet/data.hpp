#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "danet/network.hpp"
#include "danet/numerics.hpp"

namespace danet {

enum class ColumnKind { kContinuous, kCategorical, kTarget, kIgnore };

// Column roles read from a `name=continuous|categorical|target|ignore` file.
struct Schema {
  std::vector<std::pair<std::string, ColumnKind>> columns;

  static Schema parse(const std::string& text);
  static Schema load(const std::filesystem::path& path);
  // Every header column continuous except the last, which is the target.
  static Schema default_for(std::span<const std::string> header);

  const std::string& target() const;
  ColumnKind kind_of(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::string to_text() const;
  bool operator==(const Schema&) const = default;
};

struct Dataset {
  Matrix features;  // rows x n; categorical columns hold 0 until encoded
  Vector targets;   // class ids for classification, values for regression
  std::vector<std::string> feature_names;
  std::vector<ColumnKind> kinds;  // kContinuous or kCategorical per feature
  // Raw category strings for categorical columns (indexed [column][row]); empty otherwise.
  std::vector<std::vector<std::string>> categories;
  std::string target_name = "y";
  Task task;

  std::size_t rows() const { return features.rows(); }
  std::size_t cols() const { return features.cols(); }
  std::vector<std::size_t> labels() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

// RFC 4180 reader: comma separated, header row, optional quoting.
std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);
// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, bool* ok);

Dataset load_csv(const std::filesystem::path& path, const Schema& schema, TaskKind task);
void write_csv(const Dataset& data, const std::filesystem::path& path);

struct LooTable {
  double global_mean = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> stats;  // category -> (target sum, count)

  double encode(const std::string& category) const;
  bool operator==(const LooTable&) const = default;
};

struct LooFit {
  Vector codes;  // leave-one-out code of every training row
  LooTable table;
};

LooFit loo_fit(std::span<const std::string> column, std::span<const double> targets);
Vector loo_apply(const LooTable& table, std::span<const std::string> column);

struct ZScore {
  Vector mean;
  Vector stddev;
  std::vector<bool> active;  // false for columns left untouched

  bool operator==(const ZScore&) const = default;
};

ZScore zscore_fit(const Matrix& features, const std::vector<bool>& active);
Matrix zscore_apply(const ZScore& z, const Matrix& features);

// Train-only statistics: leave-one-out tables for categorical columns and a
// z-score for continuous ones.
struct Preprocessor {
  std::vector<ColumnKind> kinds;
  std::vector<LooTable> loo;  // aligned with kinds; empty tables for continuous columns
  ZScore zscore;
  bool fitted = false;

  static Preprocessor fit(const Dataset& train);
  // Training rows take their leave-one-out codes.
  Dataset transform_train(const Dataset& train) const;
  // Any other rows take the fitted category means.
  Dataset transform(const Dataset& data) const;
  bool operator==(const Preprocessor&) const = default;
};

// Holds out `fraction` of the rows, per class for classification.
std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double fraction,
                                             std::uint64_t seed);

inline constexpr std::size_t kSynthFeatures = 11;

double synth_target(int formula, std::span<const double> v);
Dataset synth_generate(int formula, std::size_t n, std::uint64_t seed, TaskKind task);

}  // namespace danet
