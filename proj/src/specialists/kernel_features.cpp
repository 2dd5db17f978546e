#include "models.hpp"

#include <cmath>
#include <numbers>

namespace softlearn::detail {

namespace {

/// z(x) = sqrt(2/D) cos(x W + b), an unbiased feature map for exp(-gamma ||x - x'||^2).
struct FourierMap {
  Matrix projection;  // d x D
  Vector phase;       // D

  Matrix transform(const Matrix& x) const {
    const double scale = std::sqrt(2.0 / static_cast<double>(phase.size()));
    return (((x * projection).rowwise() + phase.transpose()).array().cos() * scale).matrix();
  }
};

class KernelFeatureModel final : public Model {
 public:
  KernelFeatureModel(TaskKind task, int n_classes, FourierMap map, LinearScores head)
      : task_(task), n_classes_(n_classes), map_(std::move(map)), head_(std::move(head)) {}

  Matrix predict(const Matrix& x) const override {
    const Matrix z = map_.transform(x);
    if (task_ == TaskKind::Classification) return logistic_probabilities(head_, z, n_classes_);
    return head_.scores(z);
  }

  json state() const override {
    return {{"projection", matrix_to_json(map_.projection)}, {"phase", vector_to_json(map_.phase)},
            {"head", head_.state()}};
  }

 private:
  TaskKind task_;
  int n_classes_;
  FourierMap map_;
  LinearScores head_;
};

}  // namespace

std::unique_ptr<Model> train_kernel_features(const KernelFeatureParams& params, const Dataset& data,
                                             std::uint64_t seed) {
  const Index d = data.d();
  double gamma = params.gamma;
  if (gamma <= 0.0) {
    const double mean = data.features.mean();
    const double var = (data.features.array() - mean).square().mean();
    gamma = var > 0.0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }
  Rng rng(seed);
  FourierMap map;
  map.projection.resize(d, params.n_components);
  const double sd = std::sqrt(2.0 * gamma);
  for (Index j = 0; j < params.n_components; ++j) {
    for (Index i = 0; i < d; ++i) map.projection(i, j) = sd * rng.normal();
  }
  map.phase.resize(params.n_components);
  for (Index j = 0; j < params.n_components; ++j) map.phase(j) = rng.uniform(0.0, 2.0 * std::numbers::pi);

  const Matrix z = map.transform(data.features);
  LinearScores head;
  if (data.task() == TaskKind::Classification) {
    LogisticParams lp;
    lp.C = params.penalty;
    head = fit_logistic(z, data.labels.classes(), data.labels.n_classes(), lp);
  } else {
    head = fit_ridge(z, data.labels.targets(), params.penalty);
  }
  return std::make_unique<KernelFeatureModel>(data.task(), data.labels.n_classes(), std::move(map),
                                              std::move(head));
}

std::unique_ptr<Model> restore_kernel_features(TaskKind task, int n_classes, const json& state) {
  FourierMap map{matrix_from_json(state.at("projection")), vector_from_json(state.at("phase"))};
  return std::make_unique<KernelFeatureModel>(task, n_classes, std::move(map),
                                              LinearScores::from_state(state.at("head")));
}

}  // namespace softlearn::detail
