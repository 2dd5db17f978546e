#pragma once

// Internal learner implementations behind the specialists interface.

#include "softlearn/rng.hpp"
#include "softlearn/specialists.hpp"

#include <functional>
#include <memory>

namespace softlearn::detail {

using nlohmann::json;

// --- shared solvers -------------------------------------------------------

/// Minimizes a smooth function with limited-memory BFGS. `fg` returns the
/// value and writes the gradient. Stops when ||g||_inf <= tol.
struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};
LbfgsResult lbfgs(const std::function<double(const Vector&, Vector&)>& fg, Vector x0,
                  int max_iter, double tol, int history = 10);

/// Linear score model: scores = x * weights + bias.
struct LinearScores {
  Matrix weights;  // d x S
  Vector bias;     // S

  Matrix scores(const Matrix& x) const {
    return (x * weights).rowwise() + bias.transpose();
  }
  json state() const;
  static LinearScores from_state(const json& j);
};

/// L2 logistic regression. Two classes use one sigmoid score, more use softmax.
LinearScores fit_logistic(const Matrix& x, const std::vector<int>& y, int n_classes,
                          const LogisticParams& params);
Matrix logistic_probabilities(const LinearScores& model, const Matrix& x, int n_classes);

/// Ridge with unpenalized intercept.
LinearScores fit_ridge(const Matrix& x, const Vector& y, double alpha);

// --- json helpers for Eigen state -----------------------------------------

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

// --- learners -------------------------------------------------------------

std::unique_ptr<Model> train_linear(const SpecialistConfig& config, const Dataset& data);
std::unique_ptr<Model> restore_linear(const SpecialistConfig& config, TaskKind task,
                                      int n_classes, const json& state);

std::unique_ptr<Model> train_knn(const KnnParams& params, const Dataset& data);
std::unique_ptr<Model> restore_knn(const KnnParams& params, TaskKind task, int n_classes,
                                   const json& state);

std::unique_ptr<Model> train_tree(const TreeParams& params, const Dataset& data, std::uint64_t seed);
std::unique_ptr<Model> train_forest(const ForestParams& params, const Dataset& data,
                                    std::uint64_t seed);
std::unique_ptr<Model> restore_trees(TaskKind task, int n_classes, const json& state);

std::unique_ptr<Model> train_boosting(const BoostingParams& params, const Dataset& data);
std::unique_ptr<Model> restore_boosting(TaskKind task, int n_classes, const json& state);

std::unique_ptr<Model> train_kernel_features(const KernelFeatureParams& params, const Dataset& data,
                                             std::uint64_t seed);
std::unique_ptr<Model> restore_kernel_features(TaskKind task, int n_classes, const json& state);

std::unique_ptr<Model> train_mlp(const MlpParams& params, const Dataset& data, std::uint64_t seed);
std::unique_ptr<Model> restore_mlp(TaskKind task, int n_classes, const json& state);

std::unique_ptr<Model> train_naive_bayes(const NaiveBayesParams& params, const Dataset& data);
std::unique_ptr<Model> restore_naive_bayes(const json& state);

std::unique_ptr<Model> train_spline(const SplineParams& params, const Dataset& data);
std::unique_ptr<Model> restore_spline(TaskKind task, int n_classes, const json& state);

std::unique_ptr<Model> train_baseline(const Dataset& data);
std::unique_ptr<Model> restore_baseline(const json& state);

}  // namespace softlearn::detail
