#include "danet/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace danet {
namespace {

constexpr const char* kMagic = "danet-model";

struct TensorOut {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::span<const double> data;
};

std::string escape(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (c == '%' || c == '=' || c == ':' || c == ' ' || c < 0x20 || c == 0x7F) {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

const char* kind_token(ColumnKind k) {
  switch (k) {
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kTarget: return "target";
    case ColumnKind::kIgnore: return "ignore";
  }
  return "?";
}

ColumnKind kind_from_token(const std::string& t) {
  if (t == "continuous") return ColumnKind::kContinuous;
  if (t == "categorical") return ColumnKind::kCategorical;
  if (t == "target") return ColumnKind::kTarget;
  if (t == "ignore") return ColumnKind::kIgnore;
  throw std::runtime_error("model file: unknown column kind '" + t + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(std::move(cur));
  return parts;
}

double parse_number(const std::string& text, const std::string& key) {
  bool ok = false;
  const double v = parse_double(text, &ok);
  if (!ok) throw std::runtime_error("model file: bad number '" + text + "' for " + key);
  return v;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) {
    throw std::runtime_error("model file: bad count '" + text + "' for " + key);
  }
  return static_cast<std::size_t>(v);
}

void write_config(std::ostringstream& m, const DANetConfig& c, std::size_t n_features,
                  bool compressed, const GhostBatchNorm* sample_bn) {
  m << kMagic << "\n";
  m << "format_version=" << kModelFormatVersion << "\n";
  m << "compressed=" << (compressed ? "true" : "false") << "\n";
  m << "task=" << (c.task.is_classification() ? "classification" : "regression") << "\n";
  m << "num_classes=" << c.task.num_classes << "\n";
  m << "n_features=" << n_features << "\n";
  m << "depth=" << c.depth_abstlays << "\n";
  m << "k0=" << c.k0 << "\n";
  m << "d0=" << c.d0 << "\n";
  m << "d1=" << c.d1 << "\n";
  m << "dropout=" << format_double(c.dropout_rate) << "\n";
  m << "head_hidden=" << c.head_hidden << "\n";
  m << "ghost_size=" << c.ghost_size << "\n";
  if (sample_bn != nullptr) {
    m << "bn_momentum=" << format_double(sample_bn->momentum) << "\n";
    m << "bn_eps=" << format_double(sample_bn->eps) << "\n";
  }
}

void write_data_spec(std::ostringstream& m, std::vector<TensorOut>& tensors, const DataSpec& d,
                     std::vector<Vector>& scratch) {
  for (const auto& [name, kind] : d.schema.columns) {
    m << "schema=" << escape(name) << ":" << kind_token(kind) << "\n";
  }
  for (const std::string& name : d.feature_names) m << "feature=" << escape(name) << "\n";
  const Preprocessor& p = d.preprocessor;
  std::string kinds;
  for (std::size_t j = 0; j < p.kinds.size(); ++j) {
    if (j > 0) kinds += ',';
    kinds += kind_token(p.kinds[j]);
  }
  m << "pre.kinds=" << kinds << "\n";
  for (std::size_t j = 0; j < p.loo.size(); ++j) {
    if (p.kinds[j] != ColumnKind::kCategorical) continue;
    m << "loo.mean=" << j << ":" << format_double(p.loo[j].global_mean) << "\n";
    for (const auto& [cat, stat] : p.loo[j].stats) {
      m << "loo.entry=" << j << ":" << escape(cat) << ":" << format_double(stat.first) << ":"
        << stat.second << "\n";
    }
  }
  const std::size_t n = p.zscore.mean.size();
  Vector active(n);
  for (std::size_t j = 0; j < n; ++j) active[j] = p.zscore.active[j] ? 1.0 : 0.0;
  scratch.push_back(std::move(active));
  tensors.push_back({"pre.zscore.mean", 1, n, p.zscore.mean});
  tensors.push_back({"pre.zscore.stddev", 1, n, p.zscore.stddev});
  tensors.push_back({"pre.zscore.active", 1, n, scratch.back()});
}

void append_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xFF);
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::string finish(std::ostringstream& m, const std::vector<TensorOut>& tensors) {
  m << "tensors=" << tensors.size() << "\n";
  for (const TensorOut& t : tensors) {
    m << "tensor=" << t.name << " " << t.rows << " " << t.cols << "\n";
  }
  m << "end\n";
  std::string out = m.str();
  for (const TensorOut& t : tensors) {
    if (t.data.size() != t.rows * t.cols) {
      throw std::logic_error("serialize: tensor " + t.name + " has inconsistent size");
    }
    for (double v : t.data) append_le(out, v);
  }
  return out;
}

std::string unit_prefix(std::size_t b, const char* layer, std::size_t k) {
  return "block" + std::to_string(b) + "." + layer + ".unit" + std::to_string(k) + ".";
}

void add_head(std::vector<TensorOut>& tensors, const MlpHead& head) {
  for (std::size_t i = 0; i < 3; ++i) {
    const Affine& a = head.layers[i];
    const std::string p = "head." + std::to_string(i) + ".";
    tensors.push_back({p + "weight", a.weight.rows(), a.weight.cols(), a.weight.values()});
    tensors.push_back({p + "bias", 1, a.bias.size(), a.bias});
  }
}

const GhostBatchNorm* first_bn(const DANetModel& model) {
  if (model.blocks.empty() || model.blocks.front().main1.units.empty()) return nullptr;
  return &model.blocks.front().main1.units.front().bn1;
}

// Parsed manifest plus a name -> payload lookup.
struct Parsed {
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, Matrix> tensors;

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    throw std::runtime_error("model file: missing key '" + key + "'");
  }
  bool has(const std::string& key) const {
    for (const auto& e : entries)
      if (e.first == key) return true;
    return false;
  }
  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries)
      if (k == key) out.push_back(v);
    return out;
  }
  Matrix take(const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("model file: missing tensor '" + name + "'");
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw std::runtime_error("model file: tensor '" + name + "' is " +
                               it->second.shape_string() + ", expected [" + std::to_string(rows) +
                               "x" + std::to_string(cols) + "]");
    }
    Matrix m = std::move(it->second);
    tensors.erase(it);
    return m;
  }
  Vector take_vector(const std::string& name, std::size_t n) {
    Matrix m = take(name, 1, n);
    return Vector(m.values().begin(), m.values().end());
  }
};

Parsed parse(const std::string& bytes) {
  Parsed parsed;
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw std::runtime_error("model file: truncated manifest");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw std::runtime_error("model file: bad magic line");
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> directory;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("model file: bad manifest line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "tensor") {
      const auto parts = split(value, ' ');
      if (parts.size() != 3) throw std::runtime_error("model file: bad tensor line '" + line + "'");
      directory.emplace_back(parts[0], parse_count(parts[1], parts[0]), parse_count(parts[2], parts[0]));
    } else {
      parsed.entries.emplace_back(std::move(key), std::move(value));
    }
  }
  const int version = static_cast<int>(parse_count(parsed.get("format_version"), "format_version"));
  if (version != kModelFormatVersion) {
    throw std::runtime_error("model file: unsupported format version " + std::to_string(version));
  }
  if (parse_count(parsed.get("tensors"), "tensors") != directory.size()) {
    throw std::runtime_error("model file: tensor directory is incomplete");
  }
  for (const auto& [name, rows, cols] : directory) {
    const std::size_t bytes_needed = rows * cols * 8;
    if (pos + bytes_needed > bytes.size()) {
      throw std::runtime_error("model file: payload truncated in tensor '" + name + "'");
    }
    Vector data(rows * cols);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_le(bytes.data() + pos + 8 * i);
    pos += bytes_needed;
    parsed.tensors.emplace(name, Matrix(rows, cols, std::move(data)));
  }
  if (pos != bytes.size()) throw std::runtime_error("model file: trailing bytes after payload");
  return parsed;
}

DANetConfig read_config(const Parsed& p) {
  DANetConfig c;
  const std::string& task = p.get("task");
  if (task == "classification") {
    c.task.kind = TaskKind::kClassification;
  } else if (task == "regression") {
    c.task.kind = TaskKind::kRegression;
  } else {
    throw std::runtime_error("model file: unknown task '" + task + "'");
  }
  c.task.num_classes = parse_count(p.get("num_classes"), "num_classes");
  c.depth_abstlays = parse_count(p.get("depth"), "depth");
  c.k0 = parse_count(p.get("k0"), "k0");
  c.d0 = parse_count(p.get("d0"), "d0");
  c.d1 = parse_count(p.get("d1"), "d1");
  c.dropout_rate = parse_number(p.get("dropout"), "dropout");
  c.head_hidden = parse_count(p.get("head_hidden"), "head_hidden");
  c.ghost_size = parse_count(p.get("ghost_size"), "ghost_size");
  c.validate();
  return c;
}

std::optional<DataSpec> read_data_spec(Parsed& p, std::size_t n_features) {
  if (!p.has("pre.kinds")) return std::nullopt;
  DataSpec d;
  for (const std::string& entry : p.all("schema")) {
    const auto colon = entry.rfind(':');
    if (colon == std::string::npos) throw std::runtime_error("model file: bad schema entry");
    d.schema.columns.emplace_back(unescape(entry.substr(0, colon)),
                                  kind_from_token(entry.substr(colon + 1)));
  }
  for (const std::string& name : p.all("feature")) d.feature_names.push_back(unescape(name));
  Preprocessor& pre = d.preprocessor;
  for (const std::string& k : split(p.get("pre.kinds"), ',')) pre.kinds.push_back(kind_from_token(k));
  if (pre.kinds.size() != n_features) {
    throw std::runtime_error("model file: preprocessing covers " + std::to_string(pre.kinds.size()) +
                             " columns, model has " + std::to_string(n_features));
  }
  pre.loo.assign(n_features, LooTable{});
  for (const std::string& entry : p.all("loo.mean")) {
    const auto parts = split(entry, ':');
    if (parts.size() != 2) throw std::runtime_error("model file: bad loo.mean entry");
    const std::size_t col = parse_count(parts[0], "loo.mean");
    if (col >= n_features) throw std::runtime_error("model file: loo column out of range");
    pre.loo[col].global_mean = parse_number(parts[1], "loo.mean");
  }
  for (const std::string& entry : p.all("loo.entry")) {
    const auto parts = split(entry, ':');
    if (parts.size() != 4) throw std::runtime_error("model file: bad loo.entry");
    const std::size_t col = parse_count(parts[0], "loo.entry");
    if (col >= n_features) throw std::runtime_error("model file: loo column out of range");
    pre.loo[col].stats[unescape(parts[1])] = {parse_number(parts[2], "loo.entry"),
                                              parse_count(parts[3], "loo.entry")};
  }
  pre.zscore.mean = p.take_vector("pre.zscore.mean", n_features);
  pre.zscore.stddev = p.take_vector("pre.zscore.stddev", n_features);
  const Vector active = p.take_vector("pre.zscore.active", n_features);
  for (double a : active) pre.zscore.active.push_back(a != 0.0);
  pre.fitted = true;
  return d;
}

Affine read_affine(Parsed& p, std::size_t i, std::size_t out, std::size_t in) {
  const std::string prefix = "head." + std::to_string(i) + ".";
  return {p.take(prefix + "weight", out, in), p.take_vector(prefix + "bias", out)};
}

MlpHead read_head(Parsed& p, const DANetConfig& c) {
  const std::size_t h = c.resolved_head_hidden();
  MlpHead head;
  head.layers[0] = read_affine(p, 0, h, c.d0);
  head.layers[1] = read_affine(p, 1, h, h);
  head.layers[2] = read_affine(p, 2, c.task.output_dim(), h);
  return head;
}

struct LayerShape {
  const char* name;
  std::size_t in;
  std::size_t out;
};

std::array<LayerShape, 3> block_shapes(const DANetConfig& c, std::size_t n_features, std::size_t b) {
  return {{{"main1", b == 0 ? n_features : c.d0, c.d1},
           {"main2", c.d1, c.d0},
           {"shortcut", n_features, c.d0}}};
}

}  // namespace

const DANetModel& ModelFile::dense() const {
  if (compressed()) throw std::logic_error("model file holds a compressed model");
  return std::get<DANetModel>(model);
}

const CompressedModel& ModelFile::compressed_model() const {
  if (!compressed()) throw std::logic_error("model file holds an uncompressed model");
  return std::get<CompressedModel>(model);
}

const DANetConfig& ModelFile::config() const {
  return compressed() ? compressed_model().config : dense().config;
}

std::size_t ModelFile::n_features() const {
  return compressed() ? compressed_model().n_features : dense().n_features;
}

std::string serialize_model(const DANetModel& model, const DataSpec* data) {
  std::ostringstream m;
  write_config(m, model.config, model.n_features, false, first_bn(model));
  std::vector<TensorOut> tensors;
  std::vector<Vector> scratch;
  scratch.reserve(64 + model.blocks.size() * 3 * model.config.k0 * 2);
  if (data != nullptr) write_data_spec(m, tensors, *data, scratch);

  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const BasicBlock& blk = model.blocks[b];
    const std::pair<const char*, const AbstLay*> layers[3] = {
        {"main1", &blk.main1}, {"main2", &blk.main2}, {"shortcut", &blk.shortcut}};
    for (const auto& [lname, layer] : layers) {
      for (std::size_t k = 0; k < layer->units.size(); ++k) {
        const AbstractUnit& u = layer->units[k];
        const std::string p = unit_prefix(b, lname, k);
        tensors.push_back({p + "mask_logits", 1, u.mask_logits.size(), u.mask_logits});
        tensors.push_back({p + "w1", u.w1.rows(), u.w1.cols(), u.w1.values()});
        tensors.push_back({p + "w2", u.w2.rows(), u.w2.cols(), u.w2.values()});
        for (const auto& [bname, bn] :
             {std::pair{"bn1.", &u.bn1}, std::pair{"bn2.", &u.bn2}}) {
          const std::string q = p + bname;
          tensors.push_back({q + "gamma", 1, bn->dim(), bn->gamma});
          tensors.push_back({q + "beta", 1, bn->dim(), bn->beta});
          tensors.push_back({q + "running_mean", 1, bn->dim(), bn->running_mean});
          tensors.push_back({q + "running_var", 1, bn->dim(), bn->running_var});
          scratch.push_back(Vector{bn->stats_ready ? 1.0 : 0.0});
          tensors.push_back({q + "stats_ready", 1, 1, scratch.back()});
        }
      }
    }
  }
  add_head(tensors, model.head);
  return finish(m, tensors);
}

std::string serialize_model(const CompressedModel& model, const DataSpec* data) {
  std::ostringstream m;
  write_config(m, model.config, model.n_features, true, nullptr);
  std::vector<TensorOut> tensors;
  std::vector<Vector> scratch;
  scratch.reserve(8);
  if (data != nullptr) write_data_spec(m, tensors, *data, scratch);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const CompressedBlock& blk = model.blocks[b];
    const std::pair<const char*, const CompressedAbstLay*> layers[3] = {
        {"main1", &blk.main1}, {"main2", &blk.main2}, {"shortcut", &blk.shortcut}};
    for (const auto& [lname, layer] : layers) {
      for (std::size_t k = 0; k < layer->units.size(); ++k) {
        const CompressedUnit& u = layer->units[k];
        const std::string p = unit_prefix(b, lname, k);
        tensors.push_back({p + "w1s", u.w1s.rows(), u.w1s.cols(), u.w1s.values()});
        tensors.push_back({p + "b1s", 1, u.b1s.size(), u.b1s});
        tensors.push_back({p + "w2s", u.w2s.rows(), u.w2s.cols(), u.w2s.values()});
        tensors.push_back({p + "b2s", 1, u.b2s.size(), u.b2s});
      }
    }
  }
  add_head(tensors, model.head);
  return finish(m, tensors);
}

ModelFile deserialize_model(const std::string& bytes) {
  Parsed p = parse(bytes);
  const DANetConfig config = read_config(p);
  const std::size_t n_features = parse_count(p.get("n_features"), "n_features");
  const bool compressed = p.get("compressed") == "true";
  ModelFile file{DANetModel{}, read_data_spec(p, n_features)};

  if (compressed) {
    CompressedModel model;
    model.config = config;
    model.n_features = n_features;
    for (std::size_t b = 0; b < config.num_blocks(); ++b) {
      CompressedBlock blk;
      CompressedAbstLay* layers[3] = {&blk.main1, &blk.main2, &blk.shortcut};
      const auto shapes = block_shapes(config, n_features, b);
      for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t k = 0; k < config.k0; ++k) {
          const std::string pre = unit_prefix(b, shapes[l].name, k);
          CompressedUnit u;
          u.w1s = p.take(pre + "w1s", shapes[l].out, shapes[l].in);
          u.b1s = p.take_vector(pre + "b1s", shapes[l].out);
          u.w2s = p.take(pre + "w2s", shapes[l].out, shapes[l].in);
          u.b2s = p.take_vector(pre + "b2s", shapes[l].out);
          layers[l]->units.push_back(std::move(u));
        }
      }
      model.blocks.push_back(std::move(blk));
    }
    model.head = read_head(p, config);
    file.model = std::move(model);
  } else {
    const double momentum = parse_number(p.get("bn_momentum"), "bn_momentum");
    const double eps = parse_number(p.get("bn_eps"), "bn_eps");
    DANetModel model;
    model.config = config;
    model.n_features = n_features;
    for (std::size_t b = 0; b < config.num_blocks(); ++b) {
      BasicBlock blk;
      blk.dropout_rate = config.dropout_rate;
      AbstLay* layers[3] = {&blk.main1, &blk.main2, &blk.shortcut};
      const auto shapes = block_shapes(config, n_features, b);
      for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t k = 0; k < config.k0; ++k) {
          const std::string pre = unit_prefix(b, shapes[l].name, k);
          AbstractUnit u;
          u.mask_logits = p.take_vector(pre + "mask_logits", shapes[l].in);
          u.w1 = p.take(pre + "w1", shapes[l].out, shapes[l].in);
          u.w2 = p.take(pre + "w2", shapes[l].out, shapes[l].in);
          for (const auto& [bname, bn] : {std::pair{"bn1.", &u.bn1}, std::pair{"bn2.", &u.bn2}}) {
            const std::string q = pre + bname;
            bn->gamma = p.take_vector(q + "gamma", shapes[l].out);
            bn->beta = p.take_vector(q + "beta", shapes[l].out);
            bn->running_mean = p.take_vector(q + "running_mean", shapes[l].out);
            bn->running_var = p.take_vector(q + "running_var", shapes[l].out);
            bn->stats_ready = p.take_vector(q + "stats_ready", 1)[0] != 0.0;
            bn->ghost_size = config.ghost_size;
            bn->momentum = momentum;
            bn->eps = eps;
          }
          layers[l]->units.push_back(std::move(u));
        }
      }
      model.blocks.push_back(std::move(blk));
    }
    model.head = read_head(p, config);
    file.model = std::move(model);
  }
  if (!p.tensors.empty()) {
    throw std::runtime_error("model file: unexpected tensor '" + p.tensors.begin()->first + "'");
  }
  return file;
}

void save_model(const std::filesystem::path& path, const DANetModel& model, const DataSpec* data) {
  const std::string bytes = serialize_model(model, data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void save_model(const std::filesystem::path& path, const CompressedModel& model,
                const DataSpec* data) {
  const std::string bytes = serialize_model(model, data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace danet
