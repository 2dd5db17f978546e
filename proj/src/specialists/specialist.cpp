#include "models.hpp"

#include <set>

namespace softlearn {

using nlohmann::json;

const char* to_string(Family family) {
  switch (family) {
    case Family::Linear: return "linear";
    case Family::Instance: return "instance";
    case Family::Tree: return "tree";
    case Family::KernelFeature: return "kernel_feature";
    case Family::Neural: return "neural";
    case Family::Generative: return "generative";
    case Family::Spline: return "spline";
    case Family::Baseline: return "baseline";
    case Family::External: return "external";
  }
  return "unknown";
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require(bool ok, const SpecialistConfig& config, const std::string& what) {
  if (!ok) {
    throw Error(ErrorCode::Config, "specialist '" + config.id + "': " + what);
  }
}

}  // namespace

Family SpecialistConfig::family() const {
  return std::visit(
      overloaded{
          [](const LogisticParams&) { return Family::Linear; },
          [](const RidgeParams&) { return Family::Linear; },
          [](const LassoParams&) { return Family::Linear; },
          [](const KnnParams&) { return Family::Instance; },
          [](const TreeParams&) { return Family::Tree; },
          [](const ForestParams&) { return Family::Tree; },
          [](const BoostingParams&) { return Family::Tree; },
          [](const KernelFeatureParams&) { return Family::KernelFeature; },
          [](const MlpParams&) { return Family::Neural; },
          [](const NaiveBayesParams&) { return Family::Generative; },
          [](const SplineParams&) { return Family::Spline; },
          [](const BaselineParams&) { return Family::Baseline; },
          [](const ExternalParams&) { return Family::External; },
      },
      params);
}

std::string SpecialistConfig::kind() const {
  return std::visit(
      overloaded{
          [](const LogisticParams&) { return std::string("logistic"); },
          [](const RidgeParams&) { return std::string("ridge"); },
          [](const LassoParams&) { return std::string("lasso"); },
          [](const KnnParams&) { return std::string("knn"); },
          [](const TreeParams&) { return std::string("decision_tree"); },
          [](const ForestParams& p) {
            return std::string(p.extra_trees ? "extra_trees" : "random_forest");
          },
          [](const BoostingParams&) { return std::string("hist_gradient_boosting"); },
          [](const KernelFeatureParams&) { return std::string("kernel_features"); },
          [](const MlpParams&) { return std::string("mlp"); },
          [](const NaiveBayesParams&) { return std::string("gaussian_nb"); },
          [](const SplineParams&) { return std::string("spline"); },
          [](const BaselineParams&) { return std::string("baseline"); },
          [](const ExternalParams&) { return std::string("external"); },
      },
      params);
}

void SpecialistConfig::validate(TaskKind task) const {
  require(!id.empty(), *this, "empty id");
  const bool clf = task == TaskKind::Classification;
  std::visit(
      overloaded{
          [&](const LogisticParams& p) {
            require(clf, *this, "logistic regression is classification-only");
            require(p.C > 0 && p.max_iter >= 1 && p.tol > 0, *this, "needs C > 0, max_iter >= 1, tol > 0");
          },
          [&](const RidgeParams& p) {
            require(!clf, *this, "ridge is regression-only");
            require(p.alpha >= 0, *this, "needs alpha >= 0");
          },
          [&](const LassoParams& p) {
            require(!clf, *this, "lasso is regression-only");
            require(p.alpha >= 0 && p.max_iter >= 1 && p.tol > 0, *this, "needs alpha >= 0");
          },
          [&](const KnnParams& p) { require(p.k >= 1, *this, "needs k >= 1"); },
          [&](const TreeParams& p) {
            require(p.max_depth >= 1 && p.min_samples_leaf >= 1, *this, "needs depth >= 1, min leaf >= 1");
          },
          [&](const ForestParams& p) {
            require(p.n_trees >= 1 && p.max_depth >= 0 && p.min_samples_leaf >= 1, *this,
                    "needs n_trees >= 1, depth >= 0, min leaf >= 1");
          },
          [&](const BoostingParams& p) {
            require(p.rounds >= 1 && p.max_depth >= 1 && p.learning_rate > 0 && p.max_bins >= 2 &&
                        p.max_bins <= 255 && p.min_samples_leaf >= 1 && p.l2 >= 0,
                    *this, "needs rounds >= 1, depth >= 1, lr > 0, 2 <= bins <= 255");
          },
          [&](const KernelFeatureParams& p) {
            require(p.n_components >= 1 && p.penalty > 0, *this, "needs components >= 1, penalty > 0");
          },
          [&](const MlpParams& p) {
            require(!p.hidden.empty(), *this, "needs at least one hidden layer");
            for (int h : p.hidden) require(h >= 1, *this, "hidden widths must be >= 1");
            require(p.learning_rate > 0 && p.batch_size >= 1 && p.max_epochs >= 1 && p.patience >= 1 &&
                        p.validation_fraction >= 0 && p.validation_fraction < 1,
                    *this, "needs lr > 0, batch >= 1, epochs >= 1, patience >= 1, 0 <= val < 1");
          },
          [&](const NaiveBayesParams& p) {
            require(clf, *this, "Gaussian naive Bayes is classification-only");
            require(p.var_smoothing >= 0, *this, "needs var_smoothing >= 0");
          },
          [&](const SplineParams& p) {
            require(p.n_knots >= 2 && p.degree >= 1 && p.penalty > 0, *this,
                    "needs knots >= 2, degree >= 1, penalty > 0");
          },
          [&](const BaselineParams&) {},
          [&](const ExternalParams& p) {
            require(p.source != nullptr, *this, "external specialist without predictions");
            require(p.source->task == task, *this, "external predictions have the wrong task");
          },
      },
      params);
}

json to_json(const SpecialistConfig& config) {
  json j;
  j["id"] = config.id;
  j["kind"] = config.kind();
  j["seed"] = config.seed;
  json& p = j["params"];
  p = json::object();
  std::visit(
      overloaded{
          [&](const LogisticParams& x) { p = {{"C", x.C}, {"max_iter", x.max_iter}, {"tol", x.tol}}; },
          [&](const RidgeParams& x) { p = {{"alpha", x.alpha}}; },
          [&](const LassoParams& x) {
            p = {{"alpha", x.alpha}, {"max_iter", x.max_iter}, {"tol", x.tol}};
          },
          [&](const KnnParams& x) { p = {{"k", x.k}, {"distance_weighted", x.distance_weighted}}; },
          [&](const TreeParams& x) {
            p = {{"max_depth", x.max_depth}, {"min_samples_leaf", x.min_samples_leaf}};
          },
          [&](const ForestParams& x) {
            p = {{"n_trees", x.n_trees}, {"max_depth", x.max_depth}, {"min_samples_leaf", x.min_samples_leaf}};
          },
          [&](const BoostingParams& x) {
            p = {{"rounds", x.rounds}, {"max_depth", x.max_depth}, {"learning_rate", x.learning_rate},
                 {"max_bins", x.max_bins}, {"min_samples_leaf", x.min_samples_leaf}, {"l2", x.l2}};
          },
          [&](const KernelFeatureParams& x) {
            p = {{"n_components", x.n_components}, {"gamma", x.gamma}, {"penalty", x.penalty}};
          },
          [&](const MlpParams& x) {
            p = {{"hidden", x.hidden}, {"learning_rate", x.learning_rate}, {"batch_size", x.batch_size},
                 {"max_epochs", x.max_epochs}, {"patience", x.patience},
                 {"validation_fraction", x.validation_fraction}, {"tol", x.tol}};
          },
          [&](const NaiveBayesParams& x) { p = {{"var_smoothing", x.var_smoothing}}; },
          [&](const SplineParams& x) {
            p = {{"n_knots", x.n_knots}, {"degree", x.degree}, {"penalty", x.penalty}};
          },
          [&](const BaselineParams&) {},
          [&](const ExternalParams& x) {
            p = {{"source", x.source ? x.source->specialist : std::string()}};
          },
      },
      config.params);
  return j;
}

SpecialistConfig config_from_json(const json& j) {
  SpecialistConfig config;
  try {
    config.id = j.at("id").get<std::string>();
    config.seed = j.value("seed", std::uint64_t{42});
    const auto kind = j.at("kind").get<std::string>();
    const json p = j.value("params", json::object());
    if (kind == "logistic") {
      LogisticParams x;
      x.C = p.value("C", x.C);
      x.max_iter = p.value("max_iter", x.max_iter);
      x.tol = p.value("tol", x.tol);
      config.params = x;
    } else if (kind == "ridge") {
      config.params = RidgeParams{p.value("alpha", 1.0)};
    } else if (kind == "lasso") {
      LassoParams x;
      x.alpha = p.value("alpha", x.alpha);
      x.max_iter = p.value("max_iter", x.max_iter);
      x.tol = p.value("tol", x.tol);
      config.params = x;
    } else if (kind == "knn") {
      config.params = KnnParams{p.value("k", 5), p.value("distance_weighted", true)};
    } else if (kind == "decision_tree") {
      config.params = TreeParams{p.value("max_depth", 10), p.value("min_samples_leaf", 5)};
    } else if (kind == "random_forest" || kind == "extra_trees") {
      ForestParams x;
      x.extra_trees = kind == "extra_trees";
      x.n_trees = p.value("n_trees", x.n_trees);
      x.max_depth = p.value("max_depth", x.max_depth);
      x.min_samples_leaf = p.value("min_samples_leaf", x.min_samples_leaf);
      config.params = x;
    } else if (kind == "hist_gradient_boosting") {
      BoostingParams x;
      x.rounds = p.value("rounds", x.rounds);
      x.max_depth = p.value("max_depth", x.max_depth);
      x.learning_rate = p.value("learning_rate", x.learning_rate);
      x.max_bins = p.value("max_bins", x.max_bins);
      x.min_samples_leaf = p.value("min_samples_leaf", x.min_samples_leaf);
      x.l2 = p.value("l2", x.l2);
      config.params = x;
    } else if (kind == "kernel_features") {
      KernelFeatureParams x;
      x.n_components = p.value("n_components", x.n_components);
      x.gamma = p.value("gamma", x.gamma);
      x.penalty = p.value("penalty", x.penalty);
      config.params = x;
    } else if (kind == "mlp") {
      MlpParams x;
      x.hidden = p.value("hidden", x.hidden);
      x.learning_rate = p.value("learning_rate", x.learning_rate);
      x.batch_size = p.value("batch_size", x.batch_size);
      x.max_epochs = p.value("max_epochs", x.max_epochs);
      x.patience = p.value("patience", x.patience);
      x.validation_fraction = p.value("validation_fraction", x.validation_fraction);
      x.tol = p.value("tol", x.tol);
      config.params = x;
    } else if (kind == "gaussian_nb") {
      config.params = NaiveBayesParams{p.value("var_smoothing", 1e-9)};
    } else if (kind == "spline") {
      SplineParams x;
      x.n_knots = p.value("n_knots", x.n_knots);
      x.degree = p.value("degree", x.degree);
      x.penalty = p.value("penalty", x.penalty);
      config.params = x;
    } else if (kind == "baseline") {
      config.params = BaselineParams{};
    } else if (kind == "external") {
      throw Error(ErrorCode::Config,
                  "external specialists cannot be restored from a config; attach their predictions");
    } else {
      throw Error(ErrorCode::Config, "unknown specialist kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("specialist config: ") + e.what());
  }
  return config;
}

bool is_piecewise_constant(const SpecialistConfig& config) {
  return std::visit(
      overloaded{
          [](const TreeParams&) { return true; },
          [](const ForestParams&) { return true; },
          [](const BoostingParams&) { return true; },
          // Distance weights vary continuously with the query; only plain
          // majority voting is constant on each k-th order Voronoi cell.
          [](const KnnParams& p) { return !p.distance_weighted; },
          [](const BaselineParams&) { return true; },
          [](const auto&) { return false; },
      },
      config.params);
}

namespace {

void check_training_data(const SpecialistConfig& config, const Dataset& train) {
  if (train.n() < 2 || train.d() < 1) {
    throw Error(ErrorCode::DegenerateTraining,
                "specialist '" + config.id + "': training set needs n >= 2 and d >= 1");
  }
  if (train.features.rows() != train.labels.size()) {
    throw Error(ErrorCode::Dimension, "specialist '" + config.id + "': features/labels length mismatch");
  }
  if (!train.features.allFinite()) {
    throw Error(ErrorCode::Numeric, "specialist '" + config.id + "': non-finite training features");
  }
  // The prior predictor is well defined on a single class.
  if (train.task() == TaskKind::Classification && !std::holds_alternative<BaselineParams>(config.params)) {
    std::set<int> seen(train.labels.classes().begin(), train.labels.classes().end());
    if (seen.size() < 2) {
      throw Error(ErrorCode::DegenerateTraining,
                  "specialist '" + config.id + "': training set contains a single class");
    }
  }
}

std::unique_ptr<Model> dispatch_train(const SpecialistConfig& config, const Dataset& train,
                                      std::uint64_t seed) {
  using namespace detail;
  return std::visit(
      overloaded{
          [&](const LogisticParams&) { return train_linear(config, train); },
          [&](const RidgeParams&) { return train_linear(config, train); },
          [&](const LassoParams&) { return train_linear(config, train); },
          [&](const KnnParams& p) { return train_knn(p, train); },
          [&](const TreeParams& p) { return train_tree(p, train, seed); },
          [&](const ForestParams& p) { return train_forest(p, train, seed); },
          [&](const BoostingParams& p) { return train_boosting(p, train); },
          [&](const KernelFeatureParams& p) { return train_kernel_features(p, train, seed); },
          [&](const MlpParams& p) { return train_mlp(p, train, seed); },
          [&](const NaiveBayesParams& p) { return train_naive_bayes(p, train); },
          [&](const SplineParams& p) { return train_spline(p, train); },
          [&](const BaselineParams&) { return train_baseline(train); },
          [&](const ExternalParams&) -> std::unique_ptr<Model> {
            throw Error(ErrorCode::Config,
                        "specialist '" + config.id + "' is external and cannot be trained here");
          },
      },
      config.params);
}

}  // namespace

TrainedSpecialist fit(const SpecialistConfig& config, const Dataset& train, std::uint64_t seed) {
  config.validate(train.task());
  check_training_data(config, train);
  TrainedSpecialist out;
  out.config_ = config;
  out.task_ = train.task();
  out.n_classes_ = train.labels.n_classes();
  out.n_features_ = train.d();
  out.piecewise_constant_ = is_piecewise_constant(config);
  out.model_ = dispatch_train(config, train, seed);
  return out;
}

void TrainedSpecialist::check_input(const Matrix& x) const {
  if (!model_) throw Error(ErrorCode::Config, "specialist is not fitted");
  if (x.cols() != n_features_) {
    throw Error(ErrorCode::Dimension, "specialist '" + config_.id + "': expected " +
                                          std::to_string(n_features_) + " features, got " +
                                          std::to_string(x.cols()));
  }
}

Matrix TrainedSpecialist::predict_proba(const Matrix& x) const {
  if (task_ != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "predict_proba on regression specialist '" + config_.id + "'");
  }
  check_input(x);
  Matrix p = model_->predict(x);
  clip_and_renormalize(p);
  return p;
}

Vector TrainedSpecialist::predict(const Matrix& x) const {
  if (task_ != TaskKind::Regression) {
    throw Error(ErrorCode::TaskMismatch, "predict on classification specialist '" + config_.id + "'");
  }
  check_input(x);
  Matrix p = model_->predict(x);
  if (!p.allFinite()) {
    throw Error(ErrorCode::Numeric, "specialist '" + config_.id + "' produced non-finite predictions");
  }
  return p.col(0);
}

Matrix TrainedSpecialist::predict_matrix(const Matrix& x) const {
  if (task_ == TaskKind::Classification) return predict_proba(x);
  Matrix out(x.rows(), 1);
  out.col(0) = predict(x);
  return out;
}

json TrainedSpecialist::state() const {
  if (!model_) throw Error(ErrorCode::Config, "specialist is not fitted");
  return model_->state();
}

TrainedSpecialist TrainedSpecialist::restore(const SpecialistConfig& config, TaskKind task,
                                             int n_classes, Index n_features, const json& state) {
  using namespace detail;
  TrainedSpecialist out;
  out.config_ = config;
  out.task_ = task;
  out.n_classes_ = n_classes;
  out.n_features_ = n_features;
  out.piecewise_constant_ = is_piecewise_constant(config);
  try {
    out.model_ = std::visit(
        overloaded{
            [&](const LogisticParams&) { return restore_linear(config, task, n_classes, state); },
            [&](const RidgeParams&) { return restore_linear(config, task, n_classes, state); },
            [&](const LassoParams&) { return restore_linear(config, task, n_classes, state); },
            [&](const KnnParams& p) { return restore_knn(p, task, n_classes, state); },
            [&](const TreeParams&) { return restore_trees(task, n_classes, state); },
            [&](const ForestParams&) { return restore_trees(task, n_classes, state); },
            [&](const BoostingParams&) { return restore_boosting(task, n_classes, state); },
            [&](const KernelFeatureParams&) { return restore_kernel_features(task, n_classes, state); },
            [&](const MlpParams&) { return restore_mlp(task, n_classes, state); },
            [&](const NaiveBayesParams&) { return restore_naive_bayes(state); },
            [&](const SplineParams&) { return restore_spline(task, n_classes, state); },
            [&](const BaselineParams&) { return restore_baseline(state); },
            [&](const ExternalParams&) -> std::unique_ptr<Model> {
              throw Error(ErrorCode::Config, "external specialists carry no model state");
            },
        },
        config.params);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "specialist '" + config.id + "' state: " + e.what());
  }
  return out;
}

void SpecialistLibrary::validate(TaskKind task) const {
  if (specialists.empty()) throw Error(ErrorCode::Config, "specialist library is empty");
  std::set<std::string> ids;
  for (const auto& s : specialists) {
    s.validate(task);
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::Config, "duplicate specialist id '" + s.id + "'");
    }
  }
}

}  // namespace softlearn
