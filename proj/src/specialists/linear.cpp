#include "models.hpp"

#include <cmath>
#include <deque>

namespace softlearn::detail {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  Matrix m(rows, cols);
  const json& data = j.at("data");
  for (Index i = 0; i < rows; ++i) {
    for (Index jj = 0; jj < cols; ++jj) m(i, jj) = data.at(static_cast<size_t>(i)).at(static_cast<size_t>(jj)).get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json LinearScores::state() const {
  return {{"weights", matrix_to_json(weights)}, {"bias", vector_to_json(bias)}};
}

LinearScores LinearScores::from_state(const json& j) {
  return {matrix_from_json(j.at("weights")), vector_from_json(j.at("bias"))};
}

LbfgsResult lbfgs(const std::function<double(const Vector&, Vector&)>& fg, Vector x0,
                  int max_iter, double tol, int history) {
  LbfgsResult out;
  out.x = std::move(x0);
  Vector g(out.x.size());
  double f = fg(out.x, g);
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector g_new(out.x.size());
  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      out.converged = true;
      break;
    }
    // Two-loop recursion for the search direction.
    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      alpha[static_cast<size_t>(i)] = rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(q);
      q -= alpha[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      q /= std::max(1.0, g.norm());
    }
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += s_hist[i] * (alpha[i] - beta);
    }
    Vector direction = -q;
    double slope = g.dot(direction);
    if (slope >= 0) {  // not a descent direction; restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -g / std::max(1.0, g.norm());
      slope = g.dot(direction);
    }
    // Backtracking Armijo line search.
    double step = 1.0;
    Vector x_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = out.x + step * direction;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    out.iterations = it + 1;
    if (!accepted) break;
    Vector s = x_new - out.x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * std::max(1.0, s.squaredNorm())) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double decrease = f - f_new;
    out.x = x_new;
    f = f_new;
    g = g_new;
    if (decrease <= 1e-15 * std::max(1.0, std::abs(f))) {
      out.converged = g.lpNorm<Eigen::Infinity>() <= tol;
      break;
    }
  }
  if (g.lpNorm<Eigen::Infinity>() <= tol) out.converged = true;
  out.value = f;
  return out;
}

namespace {

double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LinearScores fit_logistic(const Matrix& x, const std::vector<int>& y, int n_classes,
                          const LogisticParams& params) {
  const Index n = x.rows();
  const Index d = x.cols();
  const Index s = n_classes == 2 ? 1 : n_classes;
  const double reg = 1.0 / (params.C * static_cast<double>(n));

  Matrix targets = Matrix::Zero(n, s);
  for (Index i = 0; i < n; ++i) {
    const int yi = y[static_cast<size_t>(i)];
    if (s == 1) {
      targets(i, 0) = yi == 1 ? 1.0 : 0.0;
    } else {
      targets(i, yi) = 1.0;
    }
  }

  auto fg = [&](const Vector& theta, Vector& grad) {
    Eigen::Map<const Matrix> w(theta.data(), d, s);
    Eigen::Map<const Vector> b(theta.data() + d * s, s);
    Matrix z = (x * w).rowwise() + b.transpose();
    double loss = 0.0;
    Matrix dz(n, s);
    if (s == 1) {
      for (Index i = 0; i < n; ++i) {
        loss += log1p_exp(z(i, 0)) - targets(i, 0) * z(i, 0);
        dz(i, 0) = sigmoid(z(i, 0)) - targets(i, 0);
      }
    } else {
      for (Index i = 0; i < n; ++i) {
        const double zmax = z.row(i).maxCoeff();
        const double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
        loss += lse - z.row(i).dot(targets.row(i));
        dz.row(i) = (z.row(i).array() - lse).exp().matrix() - targets.row(i);
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    grad.resize(theta.size());
    Eigen::Map<Matrix> gw(grad.data(), d, s);
    Eigen::Map<Vector> gb(grad.data() + d * s, s);
    gw = inv_n * (x.transpose() * dz) + reg * w;
    gb = inv_n * dz.colwise().sum().transpose();
    return loss * inv_n + 0.5 * reg * w.squaredNorm();
  };

  const auto result = lbfgs(fg, Vector::Zero(d * s + s), params.max_iter, params.tol);
  LinearScores model;
  model.weights = Eigen::Map<const Matrix>(result.x.data(), d, s);
  model.bias = result.x.tail(s);
  return model;
}

Matrix logistic_probabilities(const LinearScores& model, const Matrix& x, int n_classes) {
  const Matrix z = model.scores(x);
  Matrix p(x.rows(), n_classes);
  if (z.cols() == 1) {
    for (Index i = 0; i < x.rows(); ++i) {
      p(i, 1) = sigmoid(z(i, 0));
      p(i, 0) = 1.0 - p(i, 1);
    }
  } else {
    for (Index i = 0; i < x.rows(); ++i) {
      const double zmax = z.row(i).maxCoeff();
      Eigen::RowVectorXd e = (z.row(i).array() - zmax).exp();
      p.row(i) = e / e.sum();
    }
  }
  return p;
}

LinearScores fit_ridge(const Matrix& x, const Vector& y, double alpha) {
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean;
  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Vector rhs = xc.transpose() * (y.array() - y_mean).matrix();
  LinearScores model;
  Vector w = gram.ldlt().solve(rhs);
  if (!w.allFinite()) w = gram.completeOrthogonalDecomposition().solve(rhs);
  model.weights = w;
  model.bias = Vector::Constant(1, y_mean - x_mean.dot(w));
  return model;
}

namespace {

LinearScores fit_lasso(const Matrix& x, const Vector& y, const LassoParams& params) {
  const Index n = x.rows();
  const Index d = x.cols();
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean;
  const double inv_n = 1.0 / static_cast<double>(n);
  const Vector col_sq = xc.colwise().squaredNorm().transpose() * inv_n;
  Vector w = Vector::Zero(d);
  Vector residual = y.array() - y_mean;
  for (int it = 0; it < params.max_iter; ++it) {
    double max_change = 0.0;
    double max_w = 0.0;
    for (Index j = 0; j < d; ++j) {
      if (col_sq(j) <= 0.0) continue;
      const double old = w(j);
      const double rho = inv_n * xc.col(j).dot(residual) + col_sq(j) * old;
      const double shrunk = std::copysign(std::max(std::abs(rho) - params.alpha, 0.0), rho);
      const double updated = shrunk / col_sq(j);
      if (updated != old) {
        residual -= (updated - old) * xc.col(j);
        w(j) = updated;
      }
      max_change = std::max(max_change, std::abs(updated - old));
      max_w = std::max(max_w, std::abs(updated));
    }
    if (max_w == 0.0 || max_change <= params.tol * max_w) break;
  }
  LinearScores model;
  model.weights = w;
  model.bias = Vector::Constant(1, y_mean - x_mean.dot(w));
  return model;
}

class LogisticModel final : public Model {
 public:
  LogisticModel(LinearScores scores, int n_classes) : scores_(std::move(scores)), n_classes_(n_classes) {}
  Matrix predict(const Matrix& x) const override { return logistic_probabilities(scores_, x, n_classes_); }
  json state() const override { return scores_.state(); }

 private:
  LinearScores scores_;
  int n_classes_;
};

class LinearRegressionModel final : public Model {
 public:
  explicit LinearRegressionModel(LinearScores scores) : scores_(std::move(scores)) {}
  Matrix predict(const Matrix& x) const override { return scores_.scores(x); }
  json state() const override { return scores_.state(); }

 private:
  LinearScores scores_;
};

}  // namespace

std::unique_ptr<Model> train_linear(const SpecialistConfig& config, const Dataset& data) {
  if (const auto* p = std::get_if<LogisticParams>(&config.params)) {
    const int c = data.labels.n_classes();
    return std::make_unique<LogisticModel>(fit_logistic(data.features, data.labels.classes(), c, *p), c);
  }
  if (const auto* p = std::get_if<RidgeParams>(&config.params)) {
    return std::make_unique<LinearRegressionModel>(fit_ridge(data.features, data.labels.targets(), p->alpha));
  }
  const auto& p = std::get<LassoParams>(config.params);
  return std::make_unique<LinearRegressionModel>(fit_lasso(data.features, data.labels.targets(), p));
}

std::unique_ptr<Model> restore_linear(const SpecialistConfig& config, TaskKind, int n_classes,
                                      const json& state) {
  auto scores = LinearScores::from_state(state);
  if (std::holds_alternative<LogisticParams>(config.params)) {
    return std::make_unique<LogisticModel>(std::move(scores), n_classes);
  }
  return std::make_unique<LinearRegressionModel>(std::move(scores));
}

}  // namespace softlearn::detail
