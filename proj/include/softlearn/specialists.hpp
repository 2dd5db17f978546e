#pragma once

#include "softlearn/core.hpp"

#include "json.hpp"

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace softlearn {

enum class Family { Linear, Instance, Tree, KernelFeature, Neural, Generative, Spline, Baseline, External };

const char* to_string(Family family);

// Hyperparameter records, one per learner kind. Defaults are the fixed
// configurations of the default library.

/// L2-penalized logistic regression, L-BFGS. Sigmoid for C=2, softmax otherwise.
struct LogisticParams {
  double C = 1.0;
  int max_iter = 1000;
  double tol = 1e-4;
};

struct RidgeParams {
  double alpha = 1.0;
};

/// (1/2n)||y - Xw - b||^2 + alpha ||w||_1 by cyclic coordinate descent.
struct LassoParams {
  double alpha = 0.01;
  int max_iter = 1000;
  double tol = 1e-4;
};

struct KnnParams {
  int k = 5;
  bool distance_weighted = true;
};

/// CART, Gini (classification) or squared error (regression).
struct TreeParams {
  int max_depth = 10;
  int min_samples_leaf = 5;
};

/// Bagged CART (random forest) or randomized-threshold trees (extra-trees);
/// sqrt(d) candidate features per split. max_depth 0 means unlimited.
struct ForestParams {
  int n_trees = 100;
  bool extra_trees = false;
  int max_depth = 0;
  int min_samples_leaf = 1;
};

/// Histogram gradient boosting with quantile bins.
struct BoostingParams {
  int rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  int max_bins = 255;
  int min_samples_leaf = 20;
  double l2 = 0.0;
};

/// Random Fourier features for an RBF kernel feeding logistic regression
/// (penalty = C) or ridge (penalty = alpha). gamma <= 0 selects 1/(d Var(X)).
struct KernelFeatureParams {
  int n_components = 200;
  double gamma = 0.0;
  double penalty = 1.0;
};

struct MlpParams {
  std::vector<int> hidden{64, 32};
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  double validation_fraction = 0.15;
  double tol = 1e-4;
};

struct NaiveBayesParams {
  double var_smoothing = 1e-9;
};

/// Per-feature cubic B-spline expansion feeding logistic regression
/// (penalty = C) or ridge (penalty = alpha).
struct SplineParams {
  int n_knots = 4;
  int degree = 3;
  double penalty = 1.0;
};

/// Predicts the training class frequencies (classification) or mean target.
struct BaselineParams {};

/// Predictions computed outside this library, keyed by fold.
struct ExternalPredictions {
  std::string specialist;
  std::string dataset;
  TaskKind task = TaskKind::Classification;
  int n_classes = 1;
  struct Fold {
    std::vector<Index> rows;
    Matrix predictions;  // rows.size() x C (regression: x 1)
  };
  std::map<int, Fold> folds;
};

struct ExternalParams {
  std::shared_ptr<const ExternalPredictions> source;
};

using Hyperparameters =
    std::variant<LogisticParams, RidgeParams, LassoParams, KnnParams, TreeParams, ForestParams,
                 BoostingParams, KernelFeatureParams, MlpParams, NaiveBayesParams, SplineParams,
                 BaselineParams, ExternalParams>;

struct SpecialistConfig {
  std::string id;
  Hyperparameters params;
  std::uint64_t seed = 42;

  Family family() const;
  /// Kind name used in serialized configs, e.g. "logistic", "random_forest".
  std::string kind() const;
  /// Throws ErrorCode::Config on out-of-bounds hyperparameters or a learner
  /// that does not support `task`.
  void validate(TaskKind task) const;
  bool is_external() const { return std::holds_alternative<ExternalParams>(params); }
};

nlohmann::json to_json(const SpecialistConfig& config);
SpecialistConfig config_from_json(const nlohmann::json& j);

/// Fitted model state behind a TrainedSpecialist.
class Model {
 public:
  virtual ~Model() = default;
  /// Classification: m x C class probabilities. Regression: m x 1.
  virtual Matrix predict(const Matrix& x) const = 0;
  virtual nlohmann::json state() const = 0;
};

/// Immutable fitted specialist. Copies share the underlying model.
class TrainedSpecialist {
 public:
  TrainedSpecialist() = default;

  const SpecialistConfig& config() const { return config_; }
  TaskKind task() const { return task_; }
  int n_classes() const { return n_classes_; }
  Index n_features() const { return n_features_; }
  bool piecewise_constant() const { return piecewise_constant_; }

  /// Rows on the simplex: clipped to [1e-12, 1] and renormalized.
  Matrix predict_proba(const Matrix& x) const;
  Vector predict(const Matrix& x) const;
  /// predict_proba for classification, an m x 1 matrix of predictions for regression.
  Matrix predict_matrix(const Matrix& x) const;

  nlohmann::json state() const;
  static TrainedSpecialist restore(const SpecialistConfig& config, TaskKind task, int n_classes,
                                   Index n_features, const nlohmann::json& state);

  friend TrainedSpecialist fit(const SpecialistConfig& config, const Dataset& train,
                               std::uint64_t seed);

 private:
  void check_input(const Matrix& x) const;

  SpecialistConfig config_;
  TaskKind task_ = TaskKind::Classification;
  int n_classes_ = 0;
  Index n_features_ = 0;
  bool piecewise_constant_ = false;
  std::shared_ptr<const Model> model_;
};

/// True for learners whose output is constant on the cells of a finite
/// partition of feature space: trees, forests, histogram boosting,
/// uniform-vote k-NN and the constant baseline.
bool is_piecewise_constant(const SpecialistConfig& config);

TrainedSpecialist fit(const SpecialistConfig& config, const Dataset& train, std::uint64_t seed);
inline TrainedSpecialist fit(const SpecialistConfig& config, const Dataset& train) {
  return fit(config, train, config.seed);
}

/// Ordered specialist list; the order indexes weight vectors.
struct SpecialistLibrary {
  std::vector<SpecialistConfig> specialists;

  Index size() const { return static_cast<Index>(specialists.size()); }
  /// K >= 1 and unique ids; K >= 2 is enforced where a combination is formed.
  void validate(TaskKind task) const;
};

SpecialistLibrary default_library(TaskKind task, std::uint64_t seed = 42);

/// Looks up a default-library specialist by id (e.g. "random_forest").
SpecialistConfig default_specialist(TaskKind task, const std::string& id, std::uint64_t seed = 42);

}  // namespace softlearn
