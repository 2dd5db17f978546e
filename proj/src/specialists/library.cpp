#include "softlearn/specialists.hpp"

namespace softlearn {

namespace {

std::vector<SpecialistConfig> classification_roster() {
  return {
      {"logistic_c1", LogisticParams{1.0}},
      {"logistic_c0.1", LogisticParams{0.1}},
      {"knn5", KnnParams{5, true}},
      {"knn15", KnnParams{15, false}},
      {"decision_tree", TreeParams{}},
      {"random_forest", ForestParams{}},
      {"extra_trees", ForestParams{100, true}},
      {"hist_gradient_boosting", BoostingParams{}},
      {"kernel_features", KernelFeatureParams{}},
      {"mlp", MlpParams{}},
      {"gaussian_nb", NaiveBayesParams{}},
      {"spline", SplineParams{}},
  };
}

std::vector<SpecialistConfig> regression_roster() {
  return {
      {"ridge", RidgeParams{}},
      {"lasso", LassoParams{}},
      {"knn5", KnnParams{5, true}},
      {"knn15", KnnParams{15, false}},
      {"decision_tree", TreeParams{}},
      {"random_forest", ForestParams{}},
      {"extra_trees", ForestParams{100, true}},
      {"hist_gradient_boosting", BoostingParams{}},
      {"kernel_ridge", KernelFeatureParams{}},
      {"mlp", MlpParams{}},
      {"spline_ridge", SplineParams{}},
      {"mean_baseline", BaselineParams{}},
  };
}

}  // namespace

SpecialistLibrary default_library(TaskKind task, std::uint64_t seed) {
  SpecialistLibrary library;
  library.specialists =
      task == TaskKind::Classification ? classification_roster() : regression_roster();
  for (auto& s : library.specialists) s.seed = seed;
  return library;
}

SpecialistConfig default_specialist(TaskKind task, const std::string& id, std::uint64_t seed) {
  for (auto& s : default_library(task, seed).specialists) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::Config, "unknown " + std::string(to_string(task)) + " specialist '" + id + "'");
}

}  // namespace softlearn
