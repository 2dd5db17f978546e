#include "helpers.hpp"
#include "softlearn/datasets.hpp"
#include "softlearn/ensemble.hpp"
#include "softlearn/specialists.hpp"

#include <doctest.h>

#include <cmath>

using namespace softlearn;

namespace {

Dataset two_point_classes(double spread, std::uint64_t seed) {
  // Class 0 around (0,0), class 1 around (10,10), unit variance.
  Rng rng(seed);
  const Index n = 200;
  Matrix x(n, 2);
  std::vector<int> y(n);
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    y[static_cast<size_t>(i)] = c;
    x(i, 0) = 10.0 * c + spread * rng.normal();
    x(i, 1) = 10.0 * c + spread * rng.normal();
  }
  return {"two", x, LabelVector::classification(y, 2)};
}

/// Mirror-symmetric data: each point has a twin reflected through the origin
/// with the opposite label.
Dataset symmetric_pairs() {
  Rng rng(9);
  const Index half = 50;
  Matrix x(2 * half, 2);
  std::vector<int> y(2 * half);
  for (Index i = 0; i < half; ++i) {
    x(i, 0) = 1.0 + std::abs(rng.normal());
    x(i, 1) = rng.normal();
    x(i + half, 0) = -x(i, 0);
    x(i + half, 1) = -x(i, 1);
    y[static_cast<size_t>(i)] = 1;
    y[static_cast<size_t>(i + half)] = 0;
  }
  return {"sym", x, LabelVector::classification(y, 2)};
}

Dataset noisy_moons() {
  SyntheticSpec spec;
  spec.generator = "moons";
  spec.name = "moons";
  spec.n = 300;
  spec.d = 4;
  spec.noise = 0.3;
  spec.seed = 3;
  return generate(spec);
}

}  // namespace

TEST_CASE("default rosters hold 12 specialists each") {
  CHECK(default_library(TaskKind::Classification).size() == 12);
  CHECK(default_library(TaskKind::Regression).size() == 12);
  default_library(TaskKind::Classification).validate(TaskKind::Classification);
  default_library(TaskKind::Regression).validate(TaskKind::Regression);
  SpecialistLibrary two{{default_specialist(TaskKind::Classification, "knn5"),
                         default_specialist(TaskKind::Classification, "gaussian_nb")}};
  CHECK_NOTHROW(two.validate(TaskKind::Classification));
  CHECK_THROWS_AS(default_specialist(TaskKind::Classification, "catboost"), Error);
  SpecialistLibrary dup{{two.specialists[0], two.specialists[0]}};
  CHECK_THROWS_AS(dup.validate(TaskKind::Classification), Error);
}

TEST_CASE("invalid hyperparameters and task mismatches are config errors") {
  auto check_config = [](const SpecialistConfig& c, TaskKind task) {
    try {
      c.validate(task);
      FAIL("expected a config error for " << c.id);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
    }
  };
  check_config({"k0", KnnParams{0, true}}, TaskKind::Classification);
  check_config({"c0", LogisticParams{0.0}}, TaskKind::Classification);
  check_config({"logistic", LogisticParams{}}, TaskKind::Regression);
  check_config({"ridge", RidgeParams{}}, TaskKind::Classification);
  check_config({"nb", NaiveBayesParams{}}, TaskKind::Regression);
  check_config({"depth", TreeParams{0, 5}}, TaskKind::Regression);
  check_config({"mlp", MlpParams{{}, -1.0}}, TaskKind::Classification);
}

TEST_CASE("config JSON round trip") {
  for (auto task : {TaskKind::Classification, TaskKind::Regression}) {
    for (const auto& c : default_library(task, 7).specialists) {
      const auto back = config_from_json(to_json(c));
      CHECK(back.id == c.id);
      CHECK(back.kind() == c.kind());
      CHECK(back.seed == c.seed);
      CHECK(to_json(back) == to_json(c));
    }
  }
}

TEST_CASE("Gaussian NB separates unit-variance classes at (0,0) and (10,10)") {
  const auto data = two_point_classes(1.0, 1);
  const auto model = fit(default_specialist(TaskKind::Classification, "gaussian_nb"), data);
  Matrix q(2, 2);
  q << 0, 0, 10, 10;
  const auto labels = argmax_rows(model.predict_proba(q));
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 1);
}

TEST_CASE("symmetric data gives 0.5 at the symmetry point") {
  const auto data = symmetric_pairs();
  const Matrix origin = Matrix::Zero(1, 2);
  const auto nb = fit(default_specialist(TaskKind::Classification, "gaussian_nb"), data);
  const Matrix p_nb = nb.predict_proba(origin);
  CHECK(p_nb(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  const auto lr = fit(default_specialist(TaskKind::Classification, "logistic_c1"), data);
  const Matrix p_lr = lr.predict_proba(origin);
  CHECK(std::abs(p_lr(0, 0) - 0.5) < 1e-6);
}

TEST_CASE("decision tree fits a single-split pattern exactly") {
  Matrix x(20, 2);
  std::vector<int> y(20);
  for (Index i = 0; i < 20; ++i) {
    const int c = i < 10 ? 0 : 1;
    x(i, 0) = c == 0 ? -1.0 : 1.0;
    x(i, 1) = 0.5;
    y[static_cast<size_t>(i)] = c;
  }
  const Dataset data{"pattern", x, LabelVector::classification(y, 2)};
  const auto tree = fit(default_specialist(TaskKind::Classification, "decision_tree"), data);
  CHECK(argmax_rows(tree.predict_proba(x)) == y);
}

TEST_CASE("distance-weighted kNN favours the training point's own class") {
  const auto data = noisy_moons();
  const auto knn = fit(default_specialist(TaskKind::Classification, "knn5"), data);
  CHECK(argmax_rows(knn.predict_proba(data.features)) == data.labels.classes());
}

TEST_CASE("random forest is confident at training points of pure data") {
  const auto data = two_point_classes(0.5, 2);
  const auto rf = fit(default_specialist(TaskKind::Classification, "random_forest"), data);
  const Matrix p = rf.predict_proba(data.features.topRows(20));
  for (Index i = 0; i < 20; ++i) CHECK(p(i, data.labels.classes()[static_cast<size_t>(i)]) >= 0.99);
}

TEST_CASE("ridge slope matches the closed form") {
  const Index n = 201;
  Matrix x(n, 1);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i - 100);
    y(i) = 2.0 * x(i, 0);
  }
  const Dataset data{"line", x, LabelVector::regression(y)};
  const auto ridge = fit(default_specialist(TaskKind::Regression, "ridge"), data);
  // Centred closed form: slope = Sxy / (Sxx + alpha).
  const double sxx = x.col(0).squaredNorm();
  const double oracle = 2.0 * sxx / (sxx + 1.0);
  Matrix q(2, 1);
  q << 0, 1;
  const Vector pred = ridge.predict(q);
  CHECK(std::abs(pred(1) - pred(0) - oracle) < 1e-9);
  CHECK(std::abs(pred(1) - pred(0) - 2.0) < 1e-3);
}

TEST_CASE("kNN regression returns the target at a training point") {
  const auto data = testing::linear_regression(60, 3, 0.5, 4);
  const auto knn = fit(default_specialist(TaskKind::Regression, "knn5"), data);
  const Vector pred = knn.predict(data.features.topRows(5));
  for (Index i = 0; i < 5; ++i) CHECK(pred(i) == doctest::Approx(data.labels.targets()(i)).epsilon(1e-6));
}

TEST_CASE("constant targets are reproduced by every regression specialist") {
  Rng rng(8);
  const Matrix x = testing::random_matrix(80, 3, rng);
  const Dataset data{"const", x, LabelVector::regression(Vector::Constant(80, 3.25))};
  const Matrix q = testing::random_matrix(10, 3, rng);
  for (const auto& c : default_library(TaskKind::Regression).specialists) {
    const Vector pred = fit(c, data).predict(q);
    CAPTURE(c.id);
    CHECK((pred.array() - 3.25).abs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("every default specialist is deterministic, on the simplex and restorable") {
  const auto clf = noisy_moons();
  const auto reg = testing::linear_regression(150, 4, 0.3, 5);
  Rng rng(12);
  const Matrix q = testing::random_matrix(40, 4, rng);
  for (auto task : {TaskKind::Classification, TaskKind::Regression}) {
    const Dataset& data = task == TaskKind::Classification ? clf : reg;
    for (const auto& c : default_library(task).specialists) {
      CAPTURE(c.id);
      const auto a = fit(c, data, 99);
      const auto b = fit(c, data, 99);
      const Matrix pa = a.predict_matrix(q);
      CHECK(pa == b.predict_matrix(q));
      if (task == TaskKind::Classification) {
        CHECK(pa.cols() == 2);
        CHECK((pa.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
        CHECK(pa.minCoeff() >= 0.0);
      } else {
        CHECK(pa.cols() == 1);
      }
      const auto restored = TrainedSpecialist::restore(c, task, a.n_classes(), a.n_features(), a.state());
      CHECK(restored.predict_matrix(q) == pa);
      CHECK_THROWS_AS((void)a.predict_matrix(Matrix::Zero(2, 5)), Error);
    }
  }
}

TEST_CASE("piecewise-constant specialists are unmoved by 1e-9 perturbations") {
  const auto data = noisy_moons();
  Rng rng(21);
  for (const auto& c : default_library(TaskKind::Classification).specialists) {
    if (!is_piecewise_constant(c)) continue;
    CAPTURE(c.id);
    const auto model = fit(c, data);
    CHECK(model.piecewise_constant());
    Matrix q(1000, data.d());
    for (Index i = 0; i < q.rows(); ++i) {
      for (Index j = 0; j < q.cols(); ++j) q(i, j) = rng.uniform(-1.0, 2.0);
    }
    Matrix moved = q;
    for (Index i = 0; i < q.rows(); ++i) {
      for (Index j = 0; j < q.cols(); ++j) moved(i, j) += rng.uniform(-1e-9, 1e-9);
    }
    const Matrix a = model.predict_proba(q);
    const Matrix b = model.predict_proba(moved);
    Index changed = 0;
    for (Index i = 0; i < q.rows(); ++i) changed += a.row(i) == b.row(i) ? 0 : 1;
    CHECK(changed == 0);
  }
  CHECK(is_piecewise_constant(default_specialist(TaskKind::Classification, "knn15")));
  CHECK_FALSE(is_piecewise_constant(default_specialist(TaskKind::Classification, "knn5")));
  CHECK_FALSE(is_piecewise_constant(default_specialist(TaskKind::Classification, "logistic_c1")));
}

TEST_CASE("specialists from distinct families disagree on non-separable data") {
  const auto data = noisy_moons();
  const auto library = default_library(TaskKind::Classification);
  Matrix grid(400, data.d());
  Rng rng(31);
  for (Index i = 0; i < grid.rows(); ++i) {
    for (Index j = 0; j < grid.cols(); ++j) grid(i, j) = rng.uniform(-1.5, 2.5);
  }
  std::vector<Matrix> preds;
  for (const auto& c : library.specialists) preds.push_back(fit(c, data).predict_proba(grid));
  const Matrix rho = pairwise_disagreement(preds);
  for (Index k = 0; k < library.size(); ++k) {
    for (Index j = 0; j < library.size(); ++j) {
      if (library.specialists[static_cast<size_t>(k)].family() == library.specialists[static_cast<size_t>(j)].family()) continue;
      CAPTURE(library.specialists[static_cast<size_t>(k)].id);
      CAPTURE(library.specialists[static_cast<size_t>(j)].id);
      CHECK(rho(k, j) > 0.0);
    }
  }
}

TEST_CASE("every default specialist beats chance on balanced held-out data") {
  for (const char* generator : {"moons", "gaussian_classes"}) {
    SyntheticSpec spec;
    spec.generator = generator;
    spec.name = generator;
    spec.n = 400;
    spec.d = 6;
    spec.n_classes = std::string(generator) == "moons" ? 2 : 3;
    spec.noise = 0.25;
    spec.seed = 17;
    spec.params["separation"] = 1.0;
    const auto data = generate(spec);
    std::vector<Index> train, test;
    for (Index i = 0; i < data.n(); ++i) (i % 4 == 0 ? test : train).push_back(i);
    const auto tr = data.subset(train);
    const auto te = data.subset(test);
    for (const auto& c : default_library(TaskKind::Classification).specialists) {
      if (c.family() == Family::Baseline) continue;
      CAPTURE(c.id);
      const auto labels = argmax_rows(fit(c, tr).predict_proba(te.features));
      Index hits = 0;
      for (size_t i = 0; i < labels.size(); ++i) hits += labels[i] == te.labels.classes()[i] ? 1 : 0;
      CHECK(static_cast<double>(hits) / static_cast<double>(labels.size()) > 1.0 / spec.n_classes);
    }
  }
}
