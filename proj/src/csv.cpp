#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "danet/data.hpp"

namespace danet {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

ColumnKind parse_kind(const std::string& text, const std::string& column) {
  if (text == "continuous") return ColumnKind::kContinuous;
  if (text == "categorical") return ColumnKind::kCategorical;
  if (text == "target") return ColumnKind::kTarget;
  if (text == "ignore") return ColumnKind::kIgnore;
  throw std::invalid_argument("schema: column '" + column + "' has unknown kind '" + text + "'");
}

const char* kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kTarget: return "target";
    case ColumnKind::kIgnore: return "ignore";
  }
  return "?";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Schema Schema::parse(const std::string& text) {
  Schema schema;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("schema line " + std::to_string(line_no) + ": expected name=kind");
    }
    const std::string name = trim(line.substr(0, eq));
    const ColumnKind kind = parse_kind(trim(line.substr(eq + 1)), name);
    if (schema.contains(name)) {
      throw std::invalid_argument("schema: column '" + name + "' listed twice");
    }
    schema.columns.emplace_back(name, kind);
  }
  const auto targets = std::count_if(schema.columns.begin(), schema.columns.end(),
                                     [](const auto& c) { return c.second == ColumnKind::kTarget; });
  if (targets != 1) throw std::invalid_argument("schema: exactly one target column is required");
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Schema Schema::default_for(std::span<const std::string> header) {
  if (header.size() < 2) throw std::invalid_argument("CSV needs at least one feature and a target");
  Schema s;
  for (std::size_t i = 0; i < header.size(); ++i) {
    s.columns.emplace_back(header[i],
                           i + 1 == header.size() ? ColumnKind::kTarget : ColumnKind::kContinuous);
  }
  return s;
}

const std::string& Schema::target() const {
  for (const auto& [name, kind] : columns)
    if (kind == ColumnKind::kTarget) return name;
  throw std::invalid_argument("schema has no target column");
}

ColumnKind Schema::kind_of(const std::string& name) const {
  for (const auto& [n, kind] : columns)
    if (n == name) return kind;
  throw std::invalid_argument("column '" + name + "' is not described by the schema");
}

bool Schema::contains(const std::string& name) const {
  return std::any_of(columns.begin(), columns.end(), [&](const auto& c) { return c.first == name; });
}

std::string Schema::to_text() const {
  std::string out;
  for (const auto& [name, kind] : columns) out += name + "=" + kind_name(kind) + "\n";
  return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      field.clear();
      row.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw std::runtime_error(path.string() + ": unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, bool* ok) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  const bool good = !t.empty() && res.ec == std::errc() && res.ptr == last;
  if (ok != nullptr) *ok = good;
  return good ? v : 0.0;
}

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) out[i] = static_cast<std::size_t>(targets[i]);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.kinds = kinds;
  out.target_name = target_name;
  out.task = task;
  out.features = Matrix(rows.size(), cols());
  out.targets.resize(rows.size());
  out.categories.assign(categories.size(), {});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    std::copy(features.row(r).begin(), features.row(r).end(), out.features.row(i).begin());
    out.targets[i] = targets[r];
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    if (categories[c].empty()) continue;
    out.categories[c].reserve(rows.size());
    for (std::size_t r : rows) out.categories[c].push_back(categories[c][r]);
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema, TaskKind task) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw std::runtime_error(path.string() + ": missing header row");
  const std::vector<std::string>& header = rows.front();

  for (const auto& [name, kind] : schema.columns) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      throw std::runtime_error(path.string() + ": missing column '" + name + "'");
    }
  }
  Dataset data;
  data.target_name = schema.target();
  data.task.kind = task;
  std::vector<std::size_t> feature_cols;
  std::size_t target_col = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const ColumnKind kind = schema.kind_of(header[c]);
    if (kind == ColumnKind::kTarget) {
      target_col = c;
    } else if (kind != ColumnKind::kIgnore) {
      feature_cols.push_back(c);
      data.feature_names.push_back(header[c]);
      data.kinds.push_back(kind);
    }
  }
  if (feature_cols.empty()) throw std::runtime_error(path.string() + ": no feature columns");

  const std::size_t n = rows.size() - 1;
  data.features = Matrix(n, feature_cols.size());
  data.targets.resize(n);
  data.categories.assign(feature_cols.size(), {});
  for (std::size_t j = 0; j < feature_cols.size(); ++j)
    if (data.kinds[j] == ColumnKind::kCategorical) data.categories[j].resize(n);

  double max_label = -1.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[r + 1];
    const std::string where = path.string() + " line " + std::to_string(r + 2);
    if (row.size() != header.size()) {
      throw std::runtime_error(where + ": ragged row with " + std::to_string(row.size()) +
                               " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const std::string& cell = row[feature_cols[j]];
      if (data.kinds[j] == ColumnKind::kCategorical) {
        data.categories[j][r] = cell;
        continue;
      }
      bool ok = false;
      const double v = parse_double(cell, &ok);
      if (!ok || !std::isfinite(v)) {
        throw std::runtime_error(where + ": column '" + header[feature_cols[j]] +
                                 "' has non-numeric value '" + cell + "'");
      }
      data.features(r, j) = v;
    }
    bool ok = false;
    const double y = parse_double(row[target_col], &ok);
    if (!ok || !std::isfinite(y)) {
      throw std::runtime_error(where + ": target '" + data.target_name + "' has non-numeric value '" +
                               row[target_col] + "'");
    }
    if (task == TaskKind::kClassification && (y < 0.0 || y != std::floor(y))) {
      throw std::runtime_error(where + ": class label must be a non-negative integer, got '" +
                               row[target_col] + "'");
    }
    data.targets[r] = y;
    max_label = std::max(max_label, y);
  }
  if (task == TaskKind::kClassification) {
    data.task.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  }
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < data.cols(); ++j) out << csv_escape(data.feature_names[j]) << ',';
  out << csv_escape(data.target_name) << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (data.kinds[j] == ColumnKind::kCategorical && !data.categories[j].empty()) {
        out << csv_escape(data.categories[j][r]);
      } else {
        out << format_double(data.features(r, j));
      }
      out << ',';
    }
    out << format_double(data.targets[r]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace danet
