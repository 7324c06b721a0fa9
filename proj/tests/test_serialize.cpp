#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>

#include <unistd.h>

#include "danet/serialize.hpp"
#include "support/gradcheck.hpp"

using namespace danet;
using danet::testing::random_matrix;

namespace {

DANetModel trained_like_model(std::uint64_t seed) {
  DANetConfig cfg;
  cfg.depth_abstlays = 4;
  cfg.k0 = 2;
  cfg.d0 = 5;
  cfg.d1 = 6;
  cfg.ghost_size = 8;
  cfg.dropout_rate = 0.25;
  cfg.task = Task{TaskKind::kClassification, 3};
  DANetModel model = DANetModel::create(cfg, 4, seed);
  Rng rng(seed + 100);
  ModelContext ctx;
  danet_forward(model, random_matrix(rng, 16, 4), Mode::kTrain, rng, ctx);
  for (ParamRef& p : parameters(model))
    for (double& v : p.values) v += rng.normal();
  model.head.layers[0].weight(0, 0) = -0.0;
  model.head.layers[0].weight(0, 1) = std::numeric_limits<double>::denorm_min();
  model.head.layers[0].weight(0, 2) = std::nextafter(1.0, 2.0);
  return model;
}

DataSpec sample_spec() {
  Dataset d;
  d.features = Matrix::from_rows({{0, 1.5, 0, 2}, {0, -2, 0, 2}, {0, 7, 0, 2}, {0, 3, 0, 2}});
  d.targets = {1, 0, 2, 1};
  d.feature_names = {"city name", "x=1", "pct%:val", "const"};
  d.kinds = {ColumnKind::kCategorical, ColumnKind::kContinuous, ColumnKind::kCategorical,
             ColumnKind::kContinuous};
  d.categories = {{"New York", "a=b", "New York", "x:y%"}, {}, {"p", "q", "p", "\tr"}, {}};
  d.task = {TaskKind::kClassification, 3};
  DataSpec spec;
  spec.schema.columns = {{"city name", ColumnKind::kCategorical},
                         {"x=1", ColumnKind::kContinuous},
                         {"pct%:val", ColumnKind::kCategorical},
                         {"id", ColumnKind::kIgnore},
                         {"const", ColumnKind::kContinuous},
                         {"label", ColumnKind::kTarget}};
  spec.feature_names = d.feature_names;
  spec.preprocessor = Preprocessor::fit(d);
  return spec;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i]))
      return false;
  return true;
}

}  // namespace

TEST_CASE("dense model round-trip is bit-exact, including batch-norm state") {
  const DANetModel model = trained_like_model(1);
  const DataSpec spec = sample_spec();
  const std::string bytes = serialize_model(model, &spec);
  const ModelFile back = deserialize_model(bytes);
  REQUIRE_FALSE(back.compressed());
  CHECK(back.dense() == model);
  REQUIRE(back.data.has_value());
  CHECK(*back.data == spec);
  CHECK(bit_equal(back.dense().head.layers[0].weight, model.head.layers[0].weight));
  CHECK(std::signbit(back.dense().head.layers[0].weight(0, 0)));
  CHECK(back.dense().blocks[0].main1.units[0].bn1.stats_ready);
  CHECK(serialize_model(back.dense(), &*back.data) == bytes);
  CHECK(back.n_features() == 4);
  CHECK(back.config() == model.config);
  CHECK_THROWS_AS(back.compressed_model(), std::logic_error);
}

TEST_CASE("fresh model keeps stats_ready false through a round-trip") {
  const DANetModel model = DANetModel::create(DANetConfig{}, 6, 3);
  const ModelFile back = deserialize_model(serialize_model(model));
  CHECK(back.dense() == model);
  CHECK_FALSE(back.dense().blocks[0].main1.units[0].bn1.stats_ready);
  CHECK_FALSE(back.data.has_value());
}

TEST_CASE("compressed model round-trip is bit-exact with a data spec") {
  const DANetModel model = trained_like_model(2);
  const CompressedModel compressed = compress_model(model);
  const DataSpec spec = sample_spec();
  const ModelFile back = deserialize_model(serialize_model(compressed, &spec));
  REQUIRE(back.compressed());
  CHECK(back.compressed_model() == compressed);
  CHECK(*back.data == spec);
  CHECK_THROWS_AS(back.dense(), std::logic_error);
  Rng rng(4);
  const Matrix x = random_matrix(rng, 20, 4);
  CHECK(compressed_forward(back.compressed_model(), x) == compressed_forward(compressed, x));
}

TEST_CASE("files on disk round-trip") {
  const auto path = std::filesystem::temp_directory_path() /
                    ("danet_serialize_" + std::to_string(::getpid()) + ".danet");
  const DANetModel model = trained_like_model(5);
  save_model(path, model);
  CHECK(load_model(path).dense() == model);
  std::filesystem::remove(path);
  CHECK_THROWS(load_model(path));
}

TEST_CASE("corrupt files are rejected") {
  const DANetModel model = trained_like_model(6);
  const std::string bytes = serialize_model(model);

  CHECK_THROWS(deserialize_model(""));
  CHECK_THROWS(deserialize_model("not-a-model\nend\n"));
  for (std::size_t cut : {bytes.size() - 1, bytes.size() - 8, bytes.size() / 2, std::size_t{20}})
    CHECK_THROWS(deserialize_model(bytes.substr(0, cut)));
  CHECK_THROWS(deserialize_model(bytes + "x"));

  std::string version = bytes;
  const auto pos = version.find("format_version=1");
  REQUIRE(pos != std::string::npos);
  version.replace(pos, 16, "format_version=9");
  CHECK_THROWS(deserialize_model(version));

  std::string task = bytes;
  const auto tpos = task.find("task=");
  REQUIRE(tpos != std::string::npos);
  task.insert(tpos + 5, "x");
  CHECK_THROWS(deserialize_model(task));
}
