#pragma once

#include "softlearn/core.hpp"
#include "softlearn/rng.hpp"

#include <vector>

namespace testing {

using namespace softlearn;

/// Two Gaussian blobs in d dimensions centred at -sep/2 and +sep/2 on axis 0.
inline Dataset blobs(Index n, Index d, double sep, std::uint64_t seed, int n_classes = 2) {
  Rng rng(seed);
  Matrix x(n, d);
  std::vector<int> y(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % n_classes);
    y[static_cast<size_t>(i)] = c;
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    x(i, 0) += sep * (c - 0.5 * (n_classes - 1));
  }
  return {"blobs", x, LabelVector::classification(y, n_classes)};
}

/// y = w.x + noise with w = (1, -2, 0.5, 0, ...).
inline Dataset linear_regression(Index n, Index d, double noise, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    y(i) = x(i, 0) - 2.0 * (d > 1 ? x(i, 1) : 0.0) + 0.5 * (d > 2 ? x(i, 2) : 0.0) + noise * rng.normal();
  }
  return {"linear", x, LabelVector::regression(y)};
}

inline Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

/// Random point on the simplex.
inline Vector random_simplex(Index k, Rng& rng) {
  Vector w(k);
  for (Index i = 0; i < k; ++i) w(i) = -std::log(1.0 - rng.uniform());
  return w / w.sum();
}

/// Row-stochastic matrix.
inline Matrix random_probabilities(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) m.row(i) = random_simplex(cols, rng).transpose();
  return m;
}

}  // namespace testing
