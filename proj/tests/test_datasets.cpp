#include "softlearn/datasets.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace softlearn;

namespace {

double friedman1_formula(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return 10.0 * std::sin(std::numbers::pi * x(0) * x(1)) + 20.0 * (x(2) - 0.5) * (x(2) - 0.5) + 10.0 * x(3) +
         5.0 * x(4);
}

SyntheticSpec spec_of(const std::string& generator, Index n, Index d, double noise, std::uint64_t seed) {
  SyntheticSpec s;
  s.name = generator;
  s.generator = generator;
  s.n = n;
  s.d = d;
  s.noise = noise;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("friedman1 follows its formula") {
  Eigen::RowVectorXd mid = Eigen::RowVectorXd::Constant(10, 0.5);
  CHECK(friedman1_formula(mid) == doctest::Approx(14.5710678).epsilon(1e-9));
  const auto data = generate(spec_of("friedman1", 200, 10, 0.0, 3));
  CHECK(data.task() == TaskKind::Regression);
  for (Index i = 0; i < data.n(); ++i) {
    CHECK(std::abs(data.labels.targets()(i) - friedman1_formula(data.features.row(i))) < 1e-12);
  }
}

TEST_CASE("friedman1 fit of the true formula degrades with noise") {
  double previous = 2.0;
  for (double noise : {0.0, 1.0, 5.0}) {
    const auto data = generate(spec_of("friedman1", 2000, 10, noise, 4));
    const Vector& y = data.labels.targets();
    double ss_res = 0.0;
    for (Index i = 0; i < data.n(); ++i) ss_res += std::pow(y(i) - friedman1_formula(data.features.row(i)), 2);
    const double r2 = 1.0 - ss_res / (y.array() - y.mean()).square().sum();
    CHECK(r2 < previous);
    previous = r2;
  }
}

TEST_CASE("hastie labels are balanced") {
  const auto data = generate(spec_of("hastie", 100000, 10, 0.0, 5));
  Index positive = 0;
  for (int c : data.labels.classes()) positive += c;
  CHECK(std::abs(static_cast<double>(positive) / 100000.0 - 0.5) < 0.01);
}

TEST_CASE("noiseless moons lie on their arcs") {
  const auto data = generate(spec_of("moons", 500, 2, 0.0, 6));
  for (Index i = 0; i < data.n(); ++i) {
    const double x = data.features(i, 0), y = data.features(i, 1);
    const bool upper = data.labels.classes()[static_cast<size_t>(i)] == 0;
    const double r = upper ? std::hypot(x, y) : std::hypot(x - 1.0, y - 0.5);
    CHECK(std::abs(r - 1.0) < 1e-9);
  }
}

TEST_CASE("every generator is deterministic and covers its classes") {
  for (const auto& g : generator_names()) {
    CAPTURE(g);
    auto s = spec_of(g, 120, g == "friedman2" || g == "friedman3" ? 4 : 12, 0.1, 8);
    s.n_classes = g == "gaussian_classes" ? 4 : 2;
    const auto a = generate(s);
    const auto b = generate(s);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.task() == generator_task(g));
    CHECK_NOTHROW(a.validate());
    if (a.task() == TaskKind::Classification) CHECK_NOTHROW(a.labels.require_all_classes());
    s.seed = 9;
    CHECK_FALSE(generate(s).features == a.features);
  }
  CHECK_THROWS_AS(generate(spec_of("spirals", 10, 2, 0.0, 1)), Error);
  CHECK_THROWS_AS(generate(spec_of("friedman1", 10, 3, 0.0, 1)), Error);
}

TEST_CASE("label noise") {
  auto s = spec_of("gaussian_classes", 10000, 3, 0.0, 2);
  const auto clean = generate(s);
  CHECK(inject_label_noise(clean, 0.0, 1).labels == clean.labels);
  const auto noisy = inject_label_noise(clean, 0.3, 1);
  Index flipped = 0;
  for (size_t i = 0; i < clean.labels.classes().size(); ++i) {
    flipped += noisy.labels.classes()[i] != clean.labels.classes()[i] ? 1 : 0;
  }
  CHECK(flipped >= 2733);
  CHECK(flipped <= 3267);
  CHECK(inject_label_noise(clean, 0.3, 1).labels == noisy.labels);
  CHECK(noisy.features == clean.features);
}

TEST_CASE("spec JSON round trip") {
  auto s = spec_of("imbalanced_binary", 300, 5, 0.0, 11);
  s.params["minority"] = 0.1;
  s.label_noise = 0.05;
  const auto back = spec_from_json(to_json(s));
  CHECK(generate(back).labels == generate(s).labels);
  CHECK(back.param("minority", 0.0) == 0.1);
}

TEST_CASE("CSV reading examples") {
  std::istringstream in("a,b,target\n1,2,yes\n3,4,no\n");
  CsvSchema schema;
  const auto data = read_csv(in, schema, "tiny");
  CHECK(data.n() == 2);
  CHECK(data.d() == 2);
  CHECK(data.labels.classes() == std::vector<int>{1, 0});
  CHECK(schema.label_names == std::vector<std::string>{"no", "yes"});

  std::istringstream missing("a,b,target\n1,2,yes\n3,,no\n");
  CsvSchema s2;
  try {
    (void)read_csv(missing, s2);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("'b'") != std::string::npos);
  }
  std::istringstream numeric("x,target\n1,10\n2,9\n3,10\n");
  CsvSchema s3;
  CHECK(read_csv(numeric, s3).labels.classes() == std::vector<int>{1, 0, 1});
  CHECK(s3.label_names == std::vector<std::string>{"9", "10"});
}

TEST_CASE("CSV round trip") {
  for (const char* g : {"moons", "friedman1"}) {
    const auto data = generate(spec_of(g, 50, 6, 0.2, 3));
    CsvSchema schema;
    schema.task = data.task();
    std::stringstream buffer;
    write_csv(data, buffer);
    const auto back = read_csv(buffer, schema, data.name);
    CHECK(back.features == data.features);
    CHECK(back.labels == data.labels);
  }
}

TEST_CASE("manifests mix synthetic and CSV entries") {
  const auto dir = std::filesystem::temp_directory_path() / "softlearn_manifest_test";
  std::filesystem::create_directories(dir);
  const auto data = generate(spec_of("moons", 40, 3, 0.1, 1));
  write_csv(data, (dir / "moons.csv").string());
  const nlohmann::json manifest = {
      {"datasets",
       {{{"name", "synthetic"}, {"generator", "friedman2"}, {"n", 30}, {"seed", 2}},
        {{"name", "from_file"}, {"csv", "moons.csv"}, {"task", "classification"}}}}};
  const auto entries = parse_manifest(manifest, dir.string());
  REQUIRE(entries.size() == 2);
  CHECK(materialize(entries[0]).n() == 30);
  const auto loaded = materialize(entries[1]);
  CHECK(loaded.name == "from_file");
  CHECK(loaded.features == data.features);
  const nlohmann::json dup = nlohmann::json::array({{{"generator", "moons"}, {"n", 10}}, {{"generator", "moons"}, {"n", 10}}});
  CHECK_THROWS_AS(parse_manifest(dup), Error);
  CHECK_THROWS_AS(parse_manifest(nlohmann::json{{"nothing", 1}}), Error);
  std::filesystem::remove_all(dir);
}
