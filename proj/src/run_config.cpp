#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "danet/cli.hpp"
#include "danet/data.hpp"

namespace danet::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::invalid_argument bad_value(const std::string& key, const std::string& value) {
  return std::invalid_argument("invalid value '" + value + "' for key '" + key + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || end != value.data() + value.size()) throw bad_value(key, value);
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  bool ok = false;
  const double v = parse_double(value, &ok);
  if (!ok) throw bad_value(key, value);
  return v;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter size_field(T RunConfig::* group, std::size_t T::* field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = static_cast<std::size_t>(to_u64(k, v));
  };
}

template <typename T>
Setter double_field(T RunConfig::* group, double T::* field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*group).*field = to_double(k, v);
  };
}

Setter string_field(std::string RunConfig::* field) {
  return [=](RunConfig& c, const std::string&, const std::string& v) { c.*field = v; };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"depth", size_field(&RunConfig::model, &DANetConfig::depth_abstlays)},
      {"k0", size_field(&RunConfig::model, &DANetConfig::k0)},
      {"d0", size_field(&RunConfig::model, &DANetConfig::d0)},
      {"d1", size_field(&RunConfig::model, &DANetConfig::d1)},
      {"dropout", double_field(&RunConfig::model, &DANetConfig::dropout_rate)},
      {"head_hidden", size_field(&RunConfig::model, &DANetConfig::head_hidden)},
      {"task",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.model.task.kind = parse_task(v);
       }},
      {"batch_size", size_field(&RunConfig::train, &TrainConfig::batch_size)},
      {"ghost_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.ghost_size = static_cast<std::size_t>(to_u64(k, v));
         c.model.ghost_size = c.train.ghost_size;
       }},
      {"lr", double_field(&RunConfig::train, &TrainConfig::lr0)},
      {"decay_factor", double_field(&RunConfig::train, &TrainConfig::decay_factor)},
      {"decay_every", size_field(&RunConfig::train, &TrainConfig::decay_every)},
      {"weight_decay", double_field(&RunConfig::train, &TrainConfig::weight_decay)},
      {"nu1", double_field(&RunConfig::train, &TrainConfig::nu1)},
      {"nu2", double_field(&RunConfig::train, &TrainConfig::nu2)},
      {"beta1", double_field(&RunConfig::train, &TrainConfig::beta1)},
      {"beta2", double_field(&RunConfig::train, &TrainConfig::beta2)},
      {"adam_eps", double_field(&RunConfig::train, &TrainConfig::adam_eps)},
      {"max_epochs", size_field(&RunConfig::train, &TrainConfig::max_epochs)},
      {"patience", size_field(&RunConfig::train, &TrainConfig::patience)},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_u64(k, v); }},
      {"data", string_field(&RunConfig::data)},
      {"schema", string_field(&RunConfig::schema)},
      {"test_data", string_field(&RunConfig::test_data)},
      {"out", string_field(&RunConfig::out)},
      {"valid_frac",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.valid_frac = to_double(k, v);
       }},
  };
  return table;
}

}  // namespace

TaskKind parse_task(const std::string& text) {
  if (text == "class" || text == "classification") return TaskKind::kClassification;
  if (text == "rank" || text == "regression") return TaskKind::kRegression;
  throw std::invalid_argument("unknown task '" + text + "' (expected class or rank)");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str());
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(valid_frac >= 0.0 && valid_frac < 1.0)) {
    throw std::invalid_argument("valid_frac must lie in [0, 1)");
  }
  if (data.empty()) throw std::invalid_argument("no training data given (set data or --data)");
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : setters()) out.push_back(entry.first);
    return out;
  }();
  return names;
}

}  // namespace danet::cli
