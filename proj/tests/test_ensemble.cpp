#include "helpers.hpp"
#include "softlearn/cvengine.hpp"
#include "softlearn/ensemble.hpp"
#include "softlearn/simplexopt.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

using namespace softlearn;

namespace {

std::shared_ptr<ExternalPredictions> external_from(const std::string& id, const Matrix& values,
                                                   const FoldAssignment& folds) {
  auto source = std::make_shared<ExternalPredictions>();
  source->specialist = id;
  source->task = TaskKind::Classification;
  source->n_classes = static_cast<int>(values.cols());
  for (int v = 0; v < folds.n_folds; ++v) {
    ExternalPredictions::Fold fold;
    fold.rows = folds.test_rows(v);
    fold.predictions = select_rows(values, fold.rows);
    source->folds[v] = fold;
  }
  return source;
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

SoftLearner assembled(const std::vector<std::string>& ids, const Vector& weights, const Dataset& data) {
  SpecialistLibrary library;
  std::vector<TrainedSpecialist> fitted;
  const auto scaler = fit_standardizer(data.features);
  Dataset scaled = data;
  scaled.features = apply_standardizer(scaler, data.features);
  for (const auto& id : ids) {
    library.specialists.push_back(default_specialist(TaskKind::Classification, id));
    fitted.push_back(fit(library.specialists.back(), scaled));
  }
  return SoftLearner::from_parts(library, TaskKind::Classification, data.labels.n_classes(), scaler, fitted, weights);
}

}  // namespace

TEST_CASE("combination examples") {
  Matrix row(1, 3);
  row << 0.2, 0.3, 0.5;
  CHECK(combine({row, row, row}, Vector{{0.2, 0.5, 0.3}}).isApprox(row, 1e-15));
  Matrix a{{1.0, 0.0}}, b{{0.0, 1.0}};
  CHECK(combine({a, b}, Vector{{1.0, 0.0}}) == a);
  CHECK(combine({a, b}, Vector{{0.5, 0.5}}) == Matrix{{0.5, 0.5}});
}

TEST_CASE("uncertainty examples") {
  Matrix a{{1.0, 0.0}}, b{{0.0, 1.0}};
  CHECK(weighted_variance({a, a}, Vector{{0.5, 0.5}})(0) == 0.0);
  CHECK(weighted_variance({a, b}, Vector{{0.5, 0.5}})(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(weighted_variance({a, b}, Vector{{1.0, 0.0}})(0) == 0.0);
}

TEST_CASE("uncertainty equals its pairwise form") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const Index K = 2 + static_cast<Index>(rng.below(8));
    const Index C = 1 + static_cast<Index>(rng.below(4));
    std::vector<Matrix> preds;
    for (Index k = 0; k < K; ++k) preds.push_back(testing::random_matrix(7, C, rng));
    const Vector w = testing::random_simplex(K, rng);
    const Vector v = weighted_variance(preds, w);
    const Vector p = pairwise_variance(preds, w);
    CHECK(v.minCoeff() >= 0.0);
    for (Index i = 0; i < v.size(); ++i) CHECK(relative_gap(v(i), p(i)) <= 1e-10);
  }
}

TEST_CASE("Krogh-Vedelsby examples") {
  const Matrix y = Matrix::Zero(1, 1);
  const auto a = kv_decomposition({Matrix{{1.0}}, Matrix{{-1.0}}}, Vector{{0.5, 0.5}}, y);
  CHECK(a.ensemble_error == doctest::Approx(0.0));
  CHECK(a.mean_error == doctest::Approx(1.0));
  CHECK(a.ambiguity == doctest::Approx(1.0));
  const auto b = kv_decomposition({Matrix{{1.0}}, Matrix{{-1.0}}}, Vector{{0.75, 0.25}}, y);
  CHECK(b.ensemble_error == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(b.mean_error == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.ambiguity == doctest::Approx(0.75).epsilon(1e-15));
  Rng rng(2);
  const Matrix t = testing::random_matrix(9, 2, rng);
  const std::vector<Matrix> preds{testing::random_matrix(9, 2, rng), testing::random_matrix(9, 2, rng)};
  const auto c = kv_decomposition(preds, Vector{{0.0, 1.0}}, t);
  CHECK(c.ambiguity == doctest::Approx(0.0));
  CHECK(c.ensemble_error == doctest::Approx((preds[1] - t).squaredNorm() / 9.0).epsilon(1e-12));
}

TEST_CASE("Krogh-Vedelsby identity on random ensembles") {
  Rng rng(10);
  for (int t = 0; t < 300; ++t) {
    const Index K = 2 + static_cast<Index>(rng.below(9));
    const Index C = 1 + static_cast<Index>(rng.below(4));
    std::vector<Matrix> preds;
    for (Index k = 0; k < K; ++k) preds.push_back(testing::random_matrix(11, C, rng));
    const auto r = kv_decomposition(preds, testing::random_simplex(K, rng), testing::random_matrix(11, C, rng));
    CHECK(relative_gap(r.ensemble_error, r.mean_error - r.ambiguity) <= 1e-10);
  }
}

TEST_CASE("disagreement examples and the hard-voter ambiguity bound") {
  Rng rng(6);
  const Matrix p = testing::random_probabilities(20, 3, rng);
  CHECK(pairwise_disagreement({p, p, p}).isZero(0.0));
  const Matrix zero = Matrix{{1.0, 0.0}}.replicate(10, 1);
  const Matrix one = Matrix{{0.0, 1.0}}.replicate(10, 1);
  const Matrix rho = pairwise_disagreement({zero, one});
  CHECK(rho(0, 1) == 1.0);
  CHECK(rho(1, 0) == 1.0);
  CHECK(rho(0, 0) == 0.0);
  for (int t = 0; t < 100; ++t) {
    const Index K = 2 + static_cast<Index>(rng.below(5));
    std::vector<Matrix> voters;
    for (Index k = 0; k < K; ++k) {
      Matrix v = Matrix::Zero(30, 3);
      for (Index i = 0; i < 30; ++i) v(i, static_cast<Index>(rng.below(3))) = 1.0;
      voters.push_back(v);
    }
    const Vector w = testing::random_simplex(K, rng);
    const auto kv = kv_decomposition(voters, w, Matrix::Zero(30, 3));
    const Matrix r = pairwise_disagreement(voters);
    double bound = 0.0;
    for (Index k = 0; k < K; ++k) {
      for (Index j = 0; j < K; ++j) {
        if (k != j) bound += w(k) * w(j) * r(k, j);
      }
    }
    CHECK(kv.ambiguity >= bound - 1e-12);
  }
}

TEST_CASE("selective prediction examples") {
  const std::vector<int> labels{0, 1, 1, 0};
  const Vector v{{0.0, 0.2, 0.0, 0.4}};
  const auto all = selective_from(labels, v, std::numeric_limits<double>::infinity());
  CHECK(all.labels == labels);
  CHECK(all.coverage == 1.0);
  const auto strict = selective_from(labels, v, 0.0);
  CHECK(strict.labels == std::vector<int>{0, kAbstain, 1, kAbstain});
  CHECK(strict.coverage == 0.5);
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({5.0}, 0.3) == 5.0);
  const auto curve = selective_curve({0, 1, 1, 0, 1}, {0, 1, 0, 0, 0}, Vector{{0.0, 0.1, 0.9, 0.2, 0.8}});
  REQUIRE(curve.size() == 10);
  CHECK(curve.back().coverage == 1.0);
  CHECK(curve.back().accuracy == doctest::Approx(0.6));
  double best = 0.0;
  for (const auto& point : curve) best = std::max(best, point.accuracy);
  CHECK(best == 1.0);
}

TEST_CASE("a perfect memorizer takes all the weight") {
  const auto data = testing::blobs(60, 2, 1.0, 3);
  const auto folds = make_folds(data.labels, 5, 42);
  Rng rng(1);
  const Matrix noise = testing::random_probabilities(60, 2, rng);
  SpecialistLibrary library{{{"memorizer", ExternalParams{external_from("memorizer", one_hot(data.labels), folds)}},
                             {"random", ExternalParams{external_from("random", noise, folds)}}}};
  SoftLearnerOptions options;
  options.n_folds = 5;
  const auto model = SoftLearner::fit(library, data, options);
  CHECK(std::abs(model.weights()(0) - 1.0) < 1e-6);
  CHECK(std::abs(model.weights()(1)) < 1e-6);
  CHECK(model.solve_report().objective < 1e-12);
  const ExternalQuery query{{0, one_hot(data.labels)}, {1, noise}};
  CHECK(model.predict_labels(data.features, query) == data.labels.classes());
  CHECK_THROWS_AS((void)model.predict_labels(data.features), Error);
}

TEST_CASE("identical specialists give the single-specialist objective") {
  const auto data = testing::blobs(80, 3, 1.0, 5);
  const auto lr = default_specialist(TaskKind::Classification, "logistic_c1");
  auto twin = lr;
  twin.id = "logistic_twin";
  SoftLearnerOptions options;
  options.n_folds = 4;
  const auto pair = SoftLearner::fit({{lr, twin}}, data, options);
  const auto folds = make_folds(data.labels, 4, 42);
  const auto oof = assemble_oof({{lr}}, data, folds, 42);
  const double single = objective_value(flatten(oof, data.labels), Vector::Ones(1));
  CHECK(pair.solve_report().objective == doctest::Approx(single).epsilon(1e-12));
  CHECK(pair.solve_report().rank_deficient);
  CHECK(std::abs(pair.weights().sum() - 1.0) < 1e-9);
}

TEST_CASE("well separated blobs are classified almost perfectly") {
  const auto data = testing::blobs(400, 2, 10.0, 77);
  const auto outer = make_folds(data.labels, 5, 42);
  Index sl_hits = 0, oracle_hits = 0;
  for (int v = 0; v < 5; ++v) {
    const auto train = data.subset(outer.train_rows(v));
    const auto test = data.subset(outer.test_rows(v));
    const auto model = fit_soft_learner(default_library(TaskKind::Classification), train, 5, 42);
    const auto labels = model.predict_labels(test.features);
    // Independent oracle: nearest class centroid.
    Matrix centroid = Matrix::Zero(2, 2);
    Vector count = Vector::Zero(2);
    for (Index i = 0; i < train.n(); ++i) {
      const int c = train.labels.classes()[static_cast<size_t>(i)];
      centroid.row(c) += train.features.row(i);
      count(c) += 1;
    }
    for (int c = 0; c < 2; ++c) centroid.row(c) /= count(c);
    for (Index i = 0; i < test.n(); ++i) {
      const int truth = test.labels.classes()[static_cast<size_t>(i)];
      sl_hits += labels[static_cast<size_t>(i)] == truth ? 1 : 0;
      const int nearest = (test.features.row(i) - centroid.row(0)).squaredNorm() <=
                                  (test.features.row(i) - centroid.row(1)).squaredNorm() ? 0 : 1;
      oracle_hits += nearest == truth ? 1 : 0;
    }
  }
  CHECK(oracle_hits / 400.0 >= 0.99);
  CHECK(sl_hits / 400.0 >= 0.99);
}

TEST_CASE("fitted soft learner invariants, determinism and persistence") {
  const auto data = testing::blobs(150, 4, 1.2, 13, 3);
  SpecialistLibrary library{{default_specialist(TaskKind::Classification, "logistic_c1"),
                             default_specialist(TaskKind::Classification, "knn15"),
                             default_specialist(TaskKind::Classification, "decision_tree"),
                             default_specialist(TaskKind::Classification, "gaussian_nb")}};
  const auto a = fit_soft_learner(library, data, 5, 9);
  const auto b = fit_soft_learner(library, data, 5, 9);
  CHECK(a.weights() == b.weights());
  Rng rng(3);
  const Matrix q = testing::random_matrix(30, 4, rng);
  CHECK(a.predict_proba(q) == b.predict_proba(q));

  const auto& rep = a.solve_report();
  CHECK(rep.objective <= vertex_objectives(a.problem()).minCoeff());
  CHECK(kkt_certificate(a.problem(), a.weights()));
  CHECK(a.weights().minCoeff() >= 0.0);
  CHECK(std::abs(a.weights().sum() - 1.0) < 1e-9);
  const Matrix p = a.predict_proba(q);
  CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK((p - combine(a.specialist_predictions(q), a.weights())).cwiseAbs().maxCoeff() <= 1e-12);
  const auto kv = kv_decomposition(a, data);
  CHECK(relative_gap(kv.ensemble_error, kv.mean_error - kv.ambiguity) <= 1e-10);

  std::stringstream buffer;
  save_model(a, buffer);
  const auto restored = load_model(buffer);
  CHECK(restored.weights() == a.weights());
  CHECK(restored.predict_proba(q) == p);
  CHECK(restored.uncertainty(q) == a.uncertainty(q));
  std::stringstream garbage("not a model\n");
  CHECK_THROWS_AS(load_model(garbage), Error);
}

TEST_CASE("regression soft learner") {
  const auto data = testing::linear_regression(120, 3, 0.2, 8);
  SpecialistLibrary library{{default_specialist(TaskKind::Regression, "ridge"),
                             default_specialist(TaskKind::Regression, "knn5"),
                             default_specialist(TaskKind::Regression, "mean_baseline")}};
  const auto model = fit_soft_learner(library, data, 5, 1);
  CHECK(model.weights()(0) > 0.5);
  CHECK(model.weights()(2) < 1e-6);
  const Vector pred = model.predict(data.features);
  CHECK(pred.size() == data.n());
  CHECK(model.uncertainty(data.features).minCoeff() >= 0.0);
}

TEST_CASE("immunity examples") {
  const auto data = testing::blobs(120, 2, 2.0, 21);
  const auto mixed = assembled({"decision_tree", "knn15", "logistic_c1"}, Vector{{0.4, 0.2, 0.4}}, data);
  Rng rng(5);
  const Matrix q = testing::random_matrix(20, 2, rng);
  const auto r = immunity_probe(mixed, q, 1e-6, 10);
  CHECK(r.w_immune == doctest::Approx(0.6));
  CHECK(r.immune == std::vector<Index>{0, 1});

  const auto tree = assembled({"decision_tree"}, Vector::Ones(1), data);
  const auto t = immunity_probe(tree, q, 1e-9, 50);
  CHECK(std::count(t.immune_changed.begin(), t.immune_changed.end(), 1) == 0);

  const auto lr = assembled({"logistic_c1"}, Vector::Ones(1), data);
  CHECK(immunity_probe(lr, q, 1e-6, 5).w_immune == 0.0);
  CHECK_THROWS_AS(immunity_probe(lr, q, 0.0, 5), Error);
}
