#include "models.hpp"

#include <algorithm>
#include <numeric>

namespace softlearn::detail {

namespace {

class KnnModel final : public Model {
 public:
  KnnModel(KnnParams params, TaskKind task, int n_classes, Matrix points, Vector responses)
      : params_(params), task_(task), n_classes_(n_classes), points_(std::move(points)),
        responses_(std::move(responses)) {}

  Matrix predict(const Matrix& x) const override {
    const Index n = points_.rows();
    const Index k = std::min<Index>(params_.k, n);
    const Index out_cols = task_ == TaskKind::Classification ? n_classes_ : 1;
    Matrix out = Matrix::Zero(x.rows(), out_cols);
    std::vector<std::pair<double, Index>> dist(static_cast<size_t>(n));
    for (Index q = 0; q < x.rows(); ++q) {
      for (Index i = 0; i < n; ++i) {
        dist[static_cast<size_t>(i)] = {(points_.row(i) - x.row(q)).squaredNorm(), i};
      }
      // Pairs compare by (distance, index), so equidistant neighbours resolve
      // to the lowest training index.
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      std::sort(dist.begin(), dist.begin() + k);
      double total = 0.0;
      for (Index r = 0; r < k; ++r) {
        const auto [d2, i] = dist[static_cast<size_t>(r)];
        const double w = params_.distance_weighted ? 1.0 / (std::sqrt(d2) + 1e-12) : 1.0;
        total += w;
        if (task_ == TaskKind::Classification) {
          out(q, static_cast<Index>(responses_(i))) += w;
        } else {
          out(q, 0) += w * responses_(i);
        }
      }
      out.row(q) /= total;
    }
    return out;
  }

  json state() const override {
    return {{"points", matrix_to_json(points_)}, {"responses", vector_to_json(responses_)}};
  }

 private:
  KnnParams params_;
  TaskKind task_;
  int n_classes_;
  Matrix points_;
  Vector responses_;
};

}  // namespace

std::unique_ptr<Model> train_knn(const KnnParams& params, const Dataset& data) {
  Vector responses;
  if (data.task() == TaskKind::Classification) {
    const auto& y = data.labels.classes();
    responses.resize(static_cast<Index>(y.size()));
    for (size_t i = 0; i < y.size(); ++i) responses(static_cast<Index>(i)) = y[i];
  } else {
    responses = data.labels.targets();
  }
  return std::make_unique<KnnModel>(params, data.task(), data.labels.n_classes(), data.features,
                                    std::move(responses));
}

std::unique_ptr<Model> restore_knn(const KnnParams& params, TaskKind task, int n_classes,
                                   const json& state) {
  return std::make_unique<KnnModel>(params, task, n_classes, matrix_from_json(state.at("points")),
                                    vector_from_json(state.at("responses")));
}

}  // namespace softlearn::detail
