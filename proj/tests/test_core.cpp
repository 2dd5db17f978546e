#include "helpers.hpp"
#include "softlearn/parallel.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>

using namespace softlearn;

TEST_CASE("one_hot rows") {
  const Matrix a = one_hot(LabelVector::classification({0, 2, 1}, 3));
  Matrix expected(3, 3);
  expected << 1, 0, 0, 0, 0, 1, 0, 1, 0;
  CHECK(a == expected);
  const Matrix b = one_hot(LabelVector::classification({0, 0}, 2));
  CHECK(b(0, 0) == 1.0);
  CHECK(b(1, 0) == 1.0);
  CHECK(b.col(1).sum() == 0.0);
  const Matrix c = one_hot(LabelVector::classification({1}, 2));
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 1.0);
}

TEST_CASE("one_hot then argmax recovers labels") {
  Rng rng(3);
  std::vector<int> y(200);
  for (auto& v : y) v = static_cast<int>(rng.below(7));
  y[0] = 0;
  for (int c = 0; c < 7; ++c) y[static_cast<size_t>(c)] = c;
  const auto labels = LabelVector::classification(y, 7);
  CHECK(argmax_rows(one_hot(labels)) == y);
}

TEST_CASE("standardizer fit examples") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  const auto p = fit_standardizer(x);
  CHECK(p.mean(0) == doctest::Approx(2.0));
  CHECK(p.scale(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  Matrix constant(3, 1);
  constant << 5, 5, 5;
  const auto q = fit_standardizer(constant);
  CHECK(q.mean(0) == 5.0);
  CHECK(q.scale(0) == 1.0);
  Matrix single(1, 1);
  single << 0;
  CHECK(fit_standardizer(single).scale(0) == 1.0);
  CHECK(apply_standardizer(q, constant).isZero(0.0));
}

TEST_CASE("standardizer apply examples") {
  Standardizer p;
  p.mean = Vector::Constant(1, 2.0);
  p.scale = Vector::Constant(1, 0.8164965809);
  Matrix v(2, 1);
  v << 2, 3;
  const Matrix z = apply_standardizer(p, v);
  CHECK(z(0, 0) == 0.0);
  CHECK(z(1, 0) == doctest::Approx(1.2247448714).epsilon(1e-9));
}

TEST_CASE("standardized columns have mean 0 and sd 1, and invert") {
  Rng rng(11);
  Matrix x = testing::random_matrix(50, 4, rng);
  x.col(1) = x.col(1) * 1000.0 + Vector::Constant(50, 3e4);
  x.col(3).setConstant(7.0);
  const auto p = fit_standardizer(x);
  const Matrix z = apply_standardizer(p, x);
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-9);
    CHECK(std::abs(std::sqrt(z.col(j).squaredNorm() / 50.0) - 1.0) < 1e-9);
  }
  const Matrix back = invert_standardizer(p, z);
  for (Index j = 0; j < 3; ++j) {
    CHECK(((back.col(j) - x.col(j)).cwiseAbs().array() <= 1e-9 * x.col(j).cwiseAbs().array().max(1.0)).all());
  }
}

TEST_CASE("standardizer on a training partition ignores test rows") {
  Rng rng(5);
  Matrix x = testing::random_matrix(20, 3, rng);
  std::vector<Index> train{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto before = fit_standardizer(select_rows(x, train));
  x.bottomRows(10).setConstant(1e9);
  const auto after = fit_standardizer(select_rows(x, train));
  CHECK(before == after);
}

TEST_CASE("standardizer dimension errors") {
  Standardizer p;
  p.mean = Vector::Zero(2);
  p.scale = Vector::Ones(2);
  try {
    (void)apply_standardizer(p, Matrix::Zero(3, 3));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Dimension);
  }
  CHECK_THROWS_AS((void)fit_standardizer(Matrix(0, 2)), Error);
}

TEST_CASE("argmax examples") {
  CHECK(argmax_class(Vector{{0.2, 0.7, 0.1}}) == 1);
  CHECK(argmax_class(Vector{{0.5, 0.5}}) == 0);
  CHECK(argmax_class(Vector{{1.0}}) == 0);
  CHECK_THROWS_AS(argmax_class(Vector(0)), Error);
}

TEST_CASE("clip and renormalize keeps rows on the simplex") {
  Matrix p(2, 3);
  p << 0.0, 0.5, 0.5, 1.0, 0.0, 0.0;
  clip_and_renormalize(p);
  for (Index i = 0; i < 2; ++i) {
    CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-12);
    CHECK(p.row(i).minCoeff() > 0.0);
  }
}

TEST_CASE("label vectors and datasets validate") {
  CHECK_THROWS_AS(LabelVector::classification({0, 3}, 3).require_all_classes(), Error);
  CHECK_THROWS_AS(LabelVector::classification({0, 5}, 3), Error);
  Dataset bad{"bad", Matrix::Zero(3, 2), LabelVector::classification({0, 1}, 2)};
  CHECK_THROWS_AS(bad.validate(), Error);
  Matrix x = Matrix::Zero(3, 2);
  x(1, 1) = std::numeric_limits<double>::quiet_NaN();
  Dataset nan{"nan", x, LabelVector::classification({0, 1, 0}, 2)};
  CHECK_THROWS_AS(nan.validate(), Error);
  const auto d = testing::blobs(10, 2, 1.0, 1);
  const std::vector<Index> rows{3, 1};
  const auto s = d.subset(rows);
  CHECK(s.n() == 2);
  CHECK(s.features.row(0) == d.features.row(3));
  CHECK(s.labels.classes()[1] == d.labels.classes()[1]);
}

TEST_CASE("task names round trip") {
  CHECK(task_from_string(to_string(TaskKind::Classification)) == TaskKind::Classification);
  CHECK(task_from_string(to_string(TaskKind::Regression)) == TaskKind::Regression);
  CHECK_THROWS_AS(task_from_string("clustering"), Error);
}

TEST_CASE("rng streams are deterministic and derived seeds distinct") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  std::set<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 20; ++k) {
    for (std::uint64_t v = 0; v < 10; ++v) seeds.insert(derive_seed(42, k, v));
  }
  CHECK(seeds.size() == 200);
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(5) < 5);
  }
}

TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
  for (int jobs : {1, 3}) {
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), jobs, [&](size_t i) { hit[i] += 1; });
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    try {
      parallel_for(10, jobs, [](size_t i) {
        if (i == 4 || i == 7) throw std::runtime_error("task " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "task 4");
    }
  }
}
