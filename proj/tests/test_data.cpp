#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <functional>
#include <numeric>

#include <unistd.h>

#include "danet/data.hpp"

using namespace danet;

namespace {

struct TempDir {
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("danet_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream out(path / name, std::ios::binary);
    out << text;
    return path / name;
  }
};

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

Dataset labelled(std::size_t n, const std::vector<int>& labels) {
  Dataset d;
  d.features = Matrix(n, 1);
  for (std::size_t r = 0; r < n; ++r) d.features(r, 0) = static_cast<double>(r);
  d.targets.assign(labels.begin(), labels.end());
  d.kinds = {ColumnKind::kContinuous};
  d.categories = {{}};
  d.feature_names = {"x"};
  d.task = {TaskKind::kClassification, 2};
  return d;
}

}  // namespace

TEST_CASE("three-row file parses to the exact matrix") {
  TempDir dir;
  const auto path = dir.write("a.csv", "a,b,y\n1,2.5,0\n-3,4e2,1\n0.125,7,1\n");
  const Dataset d = load_csv(path, Schema::default_for(std::vector<std::string>{"a", "b", "y"}),
                             TaskKind::kClassification);
  CHECK(d.features == Matrix::from_rows({{1, 2.5}, {-3, 400}, {0.125, 7}}));
  CHECK(d.targets == Vector{0, 1, 1});
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(d.task.num_classes == 2);
}

TEST_CASE("missing target column is named") {
  TempDir dir;
  const auto path = dir.write("a.csv", "a,b\n1,2\n");
  const Schema schema = Schema::parse("a=continuous\nb=continuous\nlabel=target\n");
  CHECK(error_of([&] { load_csv(path, schema, TaskKind::kRegression); }).find("'label'") !=
        std::string::npos);
}

TEST_CASE("ragged rows and bad cells report their location") {
  TempDir dir;
  const Schema schema = Schema::parse("a=continuous\ny=target");
  const auto ragged = dir.write("r.csv", "a,y\n1,2\n3\n");
  CHECK(error_of([&] { load_csv(ragged, schema, TaskKind::kRegression); }).find("line 3") !=
        std::string::npos);
  const auto bad = dir.write("b.csv", "a,y\n1,2\nabc,3\n");
  const std::string msg = error_of([&] { load_csv(bad, schema, TaskKind::kRegression); });
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("'a'") != std::string::npos);
  CHECK(msg.find("abc") != std::string::npos);
  const auto label = dir.write("l.csv", "a,y\n1,0.5\n");
  CHECK_THROWS(load_csv(label, schema, TaskKind::kClassification));
}

TEST_CASE("RFC 4180 quoting, CRLF line ends and a byte-order mark") {
  TempDir dir;
  const auto path = dir.write("q.csv", "\xEF\xBB\xBF\"na,me\",c,y\r\n1,\"say \"\"hi\"\"\",2\r\n3,\"x\ny\",4\r\n");
  const auto rows = read_csv_rows(path);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "na,me");
  CHECK(rows[1][1] == "say \"hi\"");
  CHECK(rows[2][1] == "x\ny");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("q\"") == "\"q\"\"\"");
  CHECK(csv_escape("plain") == "plain");
}

TEST_CASE("write then read a random dataset is value-exact") {
  TempDir dir;
  Dataset d = synth_generate(3, 200, 5, TaskKind::kRegression);
  d.features(0, 0) = 1e-300;
  d.features(1, 1) = -0.1;
  d.features(2, 2) = 123456789.123456789;
  const auto path = dir.path / "rt.csv";
  write_csv(d, path);
  std::vector<std::string> header = d.feature_names;
  header.push_back(d.target_name);
  const Dataset back = load_csv(path, Schema::default_for(header), TaskKind::kRegression);
  CHECK(back.features == d.features);
  CHECK(back.targets == d.targets);
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23}) {
    bool ok = false;
    CHECK(parse_double(format_double(v), &ok) == v);
    CHECK(ok);
  }
}

TEST_CASE("categorical columns keep their raw strings") {
  TempDir dir;
  const auto path = dir.write("c.csv", "color,x,y\nred,1,0\nblue,2,1\nred,3,1\n");
  const Dataset d = load_csv(path, Schema::parse("color=categorical\nx=continuous\ny=target"),
                             TaskKind::kClassification);
  CHECK(d.kinds[0] == ColumnKind::kCategorical);
  CHECK(d.categories[0] == std::vector<std::string>{"red", "blue", "red"});
}

TEST_CASE("schema parsing") {
  const Schema s = Schema::parse("# roles\na = continuous\nb=categorical\nid=ignore\ny=target\n");
  CHECK(s.target() == "y");
  CHECK(s.kind_of("b") == ColumnKind::kCategorical);
  CHECK(s.kind_of("id") == ColumnKind::kIgnore);
  CHECK(Schema::parse(s.to_text()) == s);
  CHECK_THROWS(Schema::parse("a=continuous"));
  CHECK_THROWS(Schema::parse("a=target\nb=target"));
  CHECK_THROWS(Schema::parse("a=text\ny=target"));
  CHECK_THROWS(Schema::parse("a=continuous\na=continuous\ny=target"));
  const Schema d = Schema::default_for(std::vector<std::string>{"p", "q", "r"});
  CHECK(d.target() == "r");
  CHECK(d.kind_of("p") == ColumnKind::kContinuous);
}

TEST_CASE("leave-one-out codes by hand") {
  const std::vector<std::string> col{"A", "A"};
  const LooFit fit = loo_fit(col, Vector{0, 1});
  CHECK(fit.codes == Vector{1, 0});
  CHECK(fit.table.encode("A") == 0.5);
  CHECK(fit.table.encode("unseen") == fit.table.global_mean);
  CHECK(loo_apply(fit.table, std::vector<std::string>{"Z"}) == Vector{0.5});
  CHECK_THROWS(loo_fit(std::vector<std::string>{}, Vector{}));
}

TEST_CASE("a singleton category takes the global mean") {
  const LooFit fit = loo_fit(std::vector<std::string>{"A", "A", "B"}, Vector{1, 2, 6});
  CHECK(fit.codes[2] == 3.0);
  CHECK(fit.codes[0] == 2.0);
}

TEST_CASE("leave-one-out matches a scripted per-row oracle") {
  Rng rng(4);
  std::vector<std::string> col;
  Vector y;
  for (int i = 0; i < 300; ++i) {
    col.push_back(std::string(1, static_cast<char>('a' + rng.below(12))));
    y.push_back(rng.normal());
  }
  const LooFit fit = loo_fit(col, y);
  const double global = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  for (std::size_t r = 0; r < col.size(); ++r) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t s = 0; s < col.size(); ++s)
      if (s != r && col[s] == col[r]) {
        sum += y[s];
        ++count;
      }
    const double expected = count == 0 ? global : sum / count;
    CHECK(std::abs(fit.codes[r] - expected) <= 1e-12);
  }
}

TEST_CASE("z-score: constant columns map to zero, train stats give mean 0 and std 1") {
  Rng rng(5);
  Matrix x(50, 3);
  for (std::size_t r = 0; r < 50; ++r) {
    x(r, 0) = 4.0;
    x(r, 1) = 10 + 3 * rng.normal();
    x(r, 2) = rng.normal();
  }
  const ZScore z = zscore_fit(x, {true, true, false});
  const Matrix y = zscore_apply(z, x);
  for (std::size_t r = 0; r < 50; ++r) {
    CHECK(y(r, 0) == 0.0);
    CHECK(y(r, 2) == x(r, 2));
  }
  double mean = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < 50; ++r) mean += y(r, 1);
  mean /= 50;
  for (std::size_t r = 0; r < 50; ++r) sq += (y(r, 1) - mean) * (y(r, 1) - mean);
  CHECK(std::abs(mean) <= 1e-12);
  CHECK(std::abs(std::sqrt(sq / 50) - 1.0) <= 1e-12);

  Matrix held(3, 3, 7.0);
  const Matrix h = zscore_apply(z, held);
  for (std::size_t r = 0; r < 3; ++r)
    CHECK(std::abs(h(r, 1) - (7.0 - z.mean[1]) / z.stddev[1]) <= 1e-15);
}

TEST_CASE("preprocessor statistics never see held-out rows") {
  TempDir dir;
  std::string text = "cat,x,y\n";
  Rng rng(6);
  for (int r = 0; r < 200; ++r)
    text += std::string(1, static_cast<char>('a' + rng.below(5))) + "," + format_double(rng.normal()) +
            "," + std::to_string(rng.below(2)) + "\n";
  const auto path = dir.write("p.csv", text);
  const Schema schema = Schema::parse("cat=categorical\nx=continuous\ny=target");
  const Dataset full = load_csv(path, schema, TaskKind::kClassification);
  auto [train, valid] = stratified_split(full, 0.2, 9);
  const Preprocessor pre = Preprocessor::fit(train);

  Dataset tampered = full;
  std::vector<std::size_t> in_valid;
  for (std::size_t r = 0; r < full.rows(); ++r)
    for (std::size_t s = 0; s < valid.rows(); ++s)
      if (full.features(r, 1) == valid.features(s, 1)) in_valid.push_back(r);
  REQUIRE(in_valid.size() == valid.rows());
  for (std::size_t r : in_valid) {
    tampered.features(r, 1) = 1e6;
    tampered.categories[0][r] = "e";
  }
  auto [train2, valid2] = stratified_split(tampered, 0.2, 9);
  CHECK(Preprocessor::fit(train2) == pre);

  const Dataset encoded = pre.transform(valid);
  for (ColumnKind k : encoded.kinds) CHECK(k == ColumnKind::kContinuous);
  CHECK(all_finite(encoded.features.values()));
  const Dataset train_encoded = pre.transform_train(train);
  const LooFit oracle = loo_fit(train.categories[0], train.targets);
  const ZScore z = zscore_fit(
      [&] {
        Matrix m = train.features;
        for (std::size_t r = 0; r < m.rows(); ++r) m(r, 0) = oracle.codes[r];
        return m;
      }(),
      {false, true});
  for (std::size_t r = 0; r < train.rows(); ++r) {
    CHECK(train_encoded.features(r, 0) == oracle.codes[r]);
    CHECK(std::abs(train_encoded.features(r, 1) - (train.features(r, 1) - z.mean[1]) / z.stddev[1]) <= 1e-12);
  }
}

TEST_CASE("stratified split: 50/50 classes at 0.2 give 10/10") {
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 2;
  const Dataset d = labelled(100, labels);
  auto [train, valid] = stratified_split(d, 0.2, 1);
  CHECK(valid.rows() == 20);
  CHECK(train.rows() == 80);
  int ones = 0;
  for (double y : valid.targets) ones += y == 1.0;
  CHECK(ones == 10);
  auto [train_b, valid_b] = stratified_split(d, 0.2, 1);
  CHECK(valid_b.features == valid.features);
  auto [train_c, valid_c] = stratified_split(d, 0.2, 2);
  CHECK_FALSE(valid_c.features == valid.features);
}

TEST_CASE("stratified split keeps proportions within one row") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + rng.below(200);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(4));
    for (int c = 0; c < 4; ++c) labels[c] = c;
    for (int c = 0; c < 4; ++c) labels[4 + c] = c;
    const Dataset d = labelled(n, labels);
    auto [train, valid] = stratified_split(d, 0.2, trial);
    std::map<int, int> total, held;
    for (int l : labels) ++total[l];
    for (double y : valid.targets) ++held[static_cast<int>(y)];
    for (auto [label, count] : total) CHECK(std::abs(held[label] - 0.2 * count) <= 1.0);
    CHECK(train.rows() + valid.rows() == n);
  }
}

TEST_CASE("stratified split rejects a class with one row and splits regression uniformly") {
  CHECK_THROWS(stratified_split(labelled(5, {0, 0, 1, 0, 0}), 0.2, 0));
  Dataset reg = labelled(50, std::vector<int>(50, 0));
  reg.task = {TaskKind::kRegression, 0};
  auto [train, valid] = stratified_split(reg, 0.2, 0);
  CHECK(valid.rows() == 10);
}

TEST_CASE("synthetic formulas") {
  Vector v(11, 0.0);
  v[2] = v[3] = v[4] = v[5] = 1.0;
  CHECK(synth_target(1, v) == 4.0);
  v[0] = 123.0;
  CHECK(synth_target(1, v) == 4.0);

  Vector w(11, 0.0);
  w[0] = std::exp(1.0);
  CHECK(std::abs(synth_target(2, w) - 2.0) <= 1e-15);
  w[10] = 1e6;
  CHECK(std::abs(synth_target(2, w) - (2.0 - 1e-2)) <= 1e-12);

  Vector u(11, 0.0);
  u[6] = 1.0;
  u[7] = 2.0;
  CHECK(std::abs(synth_target(3, u) - (-10.0 * std::sin(0.3) + 9.0)) <= 1e-14);

  Vector c = v;
  c[1] = -1.0;
  CHECK(synth_target(4, c) == synth_target(1, c));
  c[1] = 1.0;
  CHECK(synth_target(4, c) == synth_target(2, c));
  CHECK_THROWS(synth_target(5, v));
  CHECK_THROWS(synth_generate(0, 10, 0, TaskKind::kRegression));
}

TEST_CASE("perturbing v0 never changes formula 1") {
  Dataset d = synth_generate(1, 500, 1, TaskKind::kRegression);
  Rng rng(2);
  for (std::size_t r = 0; r < d.rows(); ++r) {
    Vector row(d.features.row(r).begin(), d.features.row(r).end());
    row[0] += rng.normal();
    CHECK(synth_target(1, row) == d.targets[r]);
  }
}

TEST_CASE("synthetic data is deterministic, Gaussian, and median-balanced") {
  const Dataset a = synth_generate(2, 7000, 3, TaskKind::kClassification);
  const Dataset b = synth_generate(2, 7000, 3, TaskKind::kClassification);
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  CHECK(a.feature_names.front() == "v0");
  CHECK(a.feature_names.back() == "v10");
  const double ones = std::accumulate(a.targets.begin(), a.targets.end(), 0.0);
  CHECK(std::abs(ones - 3500.0) <= 1.0);
  double mean = 0.0;
  for (double v : a.features.values()) mean += v;
  mean /= a.features.size();
  CHECK(std::abs(mean) < 0.02);
  const Dataset odd = synth_generate(4, 701, 3, TaskKind::kClassification);
  const double odd_ones = std::accumulate(odd.targets.begin(), odd.targets.end(), 0.0);
  CHECK(std::abs(odd_ones - 350.5) <= 1.0);
}
