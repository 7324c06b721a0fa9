#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "danet/data.hpp"
#include "danet/network.hpp"
#include "danet/reparam.hpp"

// Model container: a text manifest terminated by a line "end", followed by the
// tensors it lists, in order, as raw little-endian IEEE-754 doubles. See
// README.md for the manifest keys.
namespace danet {

inline constexpr int kModelFormatVersion = 1;

// How raw CSV rows were turned into model inputs at training time.
struct DataSpec {
  Schema schema;
  std::vector<std::string> feature_names;  // model input order
  Preprocessor preprocessor;
  bool operator==(const DataSpec&) const = default;
};

struct ModelFile {
  std::variant<DANetModel, CompressedModel> model;
  std::optional<DataSpec> data;

  bool compressed() const { return std::holds_alternative<CompressedModel>(model); }
  const DANetModel& dense() const;
  const CompressedModel& compressed_model() const;
  const DANetConfig& config() const;
  std::size_t n_features() const;
};

std::string serialize_model(const DANetModel& model, const DataSpec* data = nullptr);
std::string serialize_model(const CompressedModel& model, const DataSpec* data = nullptr);
ModelFile deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const DANetModel& model,
                const DataSpec* data = nullptr);
void save_model(const std::filesystem::path& path, const CompressedModel& model,
                const DataSpec* data = nullptr);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace danet
