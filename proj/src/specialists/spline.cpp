#include "models.hpp"

#include <algorithm>

namespace softlearn::detail {

namespace {

/// Uniform B-spline basis per feature; inputs outside the training range are
/// clamped to it (constant extrapolation).
struct SplineBasis {
  int degree = 3;
  int n_knots = 4;
  Vector lower;
  Vector upper;

  Index per_feature() const { return n_knots + degree - 1; }

  Matrix transform(const Matrix& x) const {
    const Index m = per_feature();
    Matrix out = Matrix::Zero(x.rows(), x.cols() * m);
    std::vector<double> knots(static_cast<size_t>(n_knots + 2 * degree));
    std::vector<double> b;
    for (Index f = 0; f < x.cols(); ++f) {
      const double lo = lower(f), hi = upper(f);
      if (!(hi > lo)) continue;  // constant feature contributes nothing
      const double h = (hi - lo) / (n_knots - 1);
      for (size_t k = 0; k < knots.size(); ++k) {
        knots[k] = lo + (static_cast<double>(k) - degree) * h;
      }
      for (Index i = 0; i < x.rows(); ++i) {
        const double v = std::clamp(x(i, f), lo, hi);
        evaluate(knots, v, b);
        for (Index j = 0; j < m; ++j) out(i, f * m + j) = b[static_cast<size_t>(j)];
      }
    }
    return out;
  }

  // Cox-de Boor recursion on half-open knot spans.
  void evaluate(const std::vector<double>& t, double v, std::vector<double>& b) const {
    const size_t spans = t.size() - 1;
    b.assign(spans, 0.0);
    for (size_t i = 0; i < spans; ++i) {
      if (t[i] <= v && v < t[i + 1]) b[i] = 1.0;
    }
    for (int p = 1; p <= degree; ++p) {
      for (size_t i = 0; i + static_cast<size_t>(p) < spans; ++i) {
        const double left_den = t[i + static_cast<size_t>(p)] - t[i];
        const double right_den = t[i + static_cast<size_t>(p) + 1] - t[i + 1];
        const double left = left_den > 0 ? (v - t[i]) / left_den * b[i] : 0.0;
        const double right = right_den > 0 ? (t[i + static_cast<size_t>(p) + 1] - v) / right_den * b[i + 1] : 0.0;
        b[i] = left + right;
      }
    }
    b.resize(static_cast<size_t>(per_feature()));
  }
};

class SplineModel final : public Model {
 public:
  SplineModel(TaskKind task, int n_classes, SplineBasis basis, LinearScores head)
      : task_(task), n_classes_(n_classes), basis_(std::move(basis)), head_(std::move(head)) {}

  Matrix predict(const Matrix& x) const override {
    const Matrix z = basis_.transform(x);
    if (task_ == TaskKind::Classification) return logistic_probabilities(head_, z, n_classes_);
    return head_.scores(z);
  }

  json state() const override {
    return {{"degree", basis_.degree}, {"n_knots", basis_.n_knots}, {"lower", vector_to_json(basis_.lower)},
            {"upper", vector_to_json(basis_.upper)}, {"head", head_.state()}};
  }

 private:
  TaskKind task_;
  int n_classes_;
  SplineBasis basis_;
  LinearScores head_;
};

}  // namespace

std::unique_ptr<Model> train_spline(const SplineParams& params, const Dataset& data) {
  SplineBasis basis;
  basis.degree = params.degree;
  basis.n_knots = params.n_knots;
  basis.lower = data.features.colwise().minCoeff().transpose();
  basis.upper = data.features.colwise().maxCoeff().transpose();
  const Matrix z = basis.transform(data.features);
  LinearScores head;
  if (data.task() == TaskKind::Classification) {
    LogisticParams lp;
    lp.C = params.penalty;
    head = fit_logistic(z, data.labels.classes(), data.labels.n_classes(), lp);
  } else {
    head = fit_ridge(z, data.labels.targets(), params.penalty);
  }
  return std::make_unique<SplineModel>(data.task(), data.labels.n_classes(), std::move(basis), std::move(head));
}

std::unique_ptr<Model> restore_spline(TaskKind task, int n_classes, const json& state) {
  SplineBasis basis;
  basis.degree = state.at("degree").get<int>();
  basis.n_knots = state.at("n_knots").get<int>();
  basis.lower = vector_from_json(state.at("lower"));
  basis.upper = vector_from_json(state.at("upper"));
  return std::make_unique<SplineModel>(task, n_classes, std::move(basis), LinearScores::from_state(state.at("head")));
}

}  // namespace softlearn::detail
