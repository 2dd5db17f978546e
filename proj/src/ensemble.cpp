#include "softlearn/ensemble.hpp"

#include "softlearn/parallel.hpp"
#include "softlearn/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace softlearn {

namespace {

Error annotate(const Error& e, const std::string& phase) {
  return Error(e.code(), phase + ": " + e.what());
}

}  // namespace

SoftLearner SoftLearner::fit(const SpecialistLibrary& library, const Dataset& data,
                             const SoftLearnerOptions& options) {
  library.validate(data.task());
  SoftLearner model;
  model.library_ = library;
  model.task_ = data.task();
  model.n_classes_ = data.labels.n_classes();
  model.seed_ = options.seed;
  const int n_folds = options.n_folds > 0 ? options.n_folds : default_fold_count(data.n());

  OofPredictionTensor tensor;
  try {
    model.folds_ = make_folds(data.labels, n_folds, options.seed);
    tensor = assemble_oof(library, data, model.folds_, options.seed, {options.jobs, options.record_digests});
  } catch (const Error& e) {
    throw annotate(e, "phase 1 (out-of-fold predictions)");
  }

  try {
    model.problem_ = flatten(tensor, data.labels);
    model.report_ = solve_simplex_ls(model.problem_);
    model.weights_ = model.report_.solution;
  } catch (const Error& e) {
    throw annotate(e, "phase 2 (weight optimization)");
  }

  const auto K = static_cast<size_t>(library.size());
  try {
    model.standardizer_ = fit_standardizer(data.features);
    Dataset full = data;
    full.features = apply_standardizer(model.standardizer_, data.features);
    model.specialists_.assign(K, TrainedSpecialist{});
    model.refit_seconds_.assign(K, 0.0);
    parallel_for(K, options.jobs, [&](size_t k) {
      const auto& config = library.specialists[k];
      if (config.is_external()) return;
      try {
        const auto start = std::chrono::steady_clock::now();
        model.specialists_[k] = softlearn::fit(config, full, derive_seed(options.seed, k, static_cast<std::uint64_t>(n_folds)));
        model.refit_seconds_[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      } catch (const Error& e) {
        throw Error(e.code(), "specialist '" + config.id + "': " + e.what());
      }
    });
  } catch (const Error& e) {
    throw annotate(e, "phase 3 (full-data refit)");
  }

  if (options.record_digests) {
    for (const auto& per_fold : tensor.state_digests) model.digests_.insert(model.digests_.end(), per_fold.begin(), per_fold.end());
    for (const auto& s : model.specialists_) model.digests_.push_back(s.config().id.empty() ? 0 : state_digest(s));
  }
  if (options.keep_oof) model.oof_ = std::move(tensor);
  return model;
}

SoftLearner SoftLearner::from_parts(SpecialistLibrary library, TaskKind task, int n_classes,
                                    Standardizer standardizer, std::vector<TrainedSpecialist> specialists,
                                    WeightVector weights) {
  if (static_cast<Index>(specialists.size()) != library.size() || weights.size() != library.size()) {
    throw Error(ErrorCode::Dimension, "from_parts: library, specialists and weights differ in length");
  }
  if ((weights.array() < -1e-12).any() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw Error(ErrorCode::Config, "from_parts: weights are not on the simplex");
  }
  SoftLearner model;
  model.library_ = std::move(library);
  model.task_ = task;
  model.n_classes_ = task == TaskKind::Classification ? n_classes : 1;
  model.standardizer_ = std::move(standardizer);
  model.specialists_ = std::move(specialists);
  model.weights_ = weights.cwiseMax(0.0);
  model.report_.solution = model.weights_;
  model.report_.converged = true;
  return model;
}

SoftLearner fit_soft_learner(const SpecialistLibrary& library, const Dataset& data, int n_folds,
                             std::uint64_t master_seed) {
  SoftLearnerOptions options;
  options.n_folds = n_folds;
  options.seed = master_seed;
  return SoftLearner::fit(library, data, options);
}

void SoftLearner::slim() { oof_.reset(); }

void SoftLearner::check_input(const Matrix& x) const {
  if (x.cols() != n_features()) {
    throw Error(ErrorCode::Dimension, "expected " + std::to_string(n_features()) + " features, got " +
                                          std::to_string(x.cols()));
  }
}

std::vector<Matrix> SoftLearner::specialist_predictions(const Matrix& x, const ExternalQuery& external) const {
  check_input(x);
  const Matrix z = apply_standardizer(standardizer_, x);
  const Index C = task_ == TaskKind::Classification ? n_classes_ : 1;
  std::vector<Matrix> out(specialists_.size());
  for (size_t k = 0; k < specialists_.size(); ++k) {
    if (library_.specialists[k].is_external()) {
      const auto it = external.find(static_cast<Index>(k));
      if (it == external.end()) {
        throw Error(ErrorCode::Coverage, "no query predictions for external specialist '" +
                                             library_.specialists[k].id + "'");
      }
      if (it->second.rows() != x.rows() || it->second.cols() != C) {
        throw Error(ErrorCode::Dimension, "external predictions for '" + library_.specialists[k].id +
                                              "' have the wrong shape");
      }
      out[k] = it->second;
    } else {
      out[k] = specialists_[k].predict_matrix(z);
    }
  }
  return out;
}

Matrix combine(const std::vector<Matrix>& predictions, const Eigen::Ref<const Vector>& weights) {
  if (predictions.empty() || static_cast<Index>(predictions.size()) != weights.size()) {
    throw Error(ErrorCode::Dimension, "combine: prediction and weight counts differ");
  }
  Matrix out = Matrix::Zero(predictions[0].rows(), predictions[0].cols());
  for (size_t k = 0; k < predictions.size(); ++k) {
    if (weights(static_cast<Index>(k)) != 0.0) out += weights(static_cast<Index>(k)) * predictions[k];
  }
  return out;
}

Matrix SoftLearner::predict_matrix(const Matrix& x, const ExternalQuery& external) const {
  return combine(specialist_predictions(x, external), weights_);
}

Matrix SoftLearner::predict_proba(const Matrix& x, const ExternalQuery& external) const {
  if (task_ != TaskKind::Classification) throw Error(ErrorCode::TaskMismatch, "predict_proba on a regression model");
  return predict_matrix(x, external);
}

std::vector<int> SoftLearner::predict_labels(const Matrix& x, const ExternalQuery& external) const {
  return argmax_rows(predict_proba(x, external));
}

Vector SoftLearner::predict(const Matrix& x, const ExternalQuery& external) const {
  if (task_ != TaskKind::Regression) throw Error(ErrorCode::TaskMismatch, "predict on a classification model");
  return predict_matrix(x, external).col(0);
}

Vector weighted_variance(const std::vector<Matrix>& predictions, const Eigen::Ref<const Vector>& weights) {
  const Matrix center = combine(predictions, weights);
  Vector v = Vector::Zero(center.rows());
  for (size_t k = 0; k < predictions.size(); ++k) {
    const double a = weights(static_cast<Index>(k));
    if (a != 0.0) v += a * (predictions[k] - center).rowwise().squaredNorm();
  }
  return v;
}

Vector pairwise_variance(const std::vector<Matrix>& predictions, const Eigen::Ref<const Vector>& weights) {
  Vector v = Vector::Zero(predictions.empty() ? 0 : predictions[0].rows());
  for (size_t k = 0; k < predictions.size(); ++k) {
    for (size_t j = k + 1; j < predictions.size(); ++j) {
      v += weights(static_cast<Index>(k)) * weights(static_cast<Index>(j)) *
           (predictions[k] - predictions[j]).rowwise().squaredNorm();
    }
  }
  return v;
}

Vector SoftLearner::uncertainty(const Matrix& x, const ExternalQuery& external) const {
  return weighted_variance(specialist_predictions(x, external), weights_);
}

// --- diversity --------------------------------------------------------------

DiversityReport kv_decomposition(const std::vector<Matrix>& predictions,
                                 const Eigen::Ref<const Vector>& weights, const Matrix& targets) {
  const Matrix ensemble = combine(predictions, weights);
  if (ensemble.rows() != targets.rows() || ensemble.cols() != targets.cols() || targets.rows() == 0) {
    throw Error(ErrorCode::Dimension, "kv_decomposition: targets do not match predictions");
  }
  const double inv_m = 1.0 / static_cast<double>(targets.rows());
  DiversityReport out;
  out.ensemble_error = (ensemble - targets).squaredNorm() * inv_m;
  for (size_t k = 0; k < predictions.size(); ++k) {
    const double a = weights(static_cast<Index>(k));
    out.mean_error += a * (predictions[k] - targets).squaredNorm() * inv_m;
    out.ambiguity += a * (predictions[k] - ensemble).squaredNorm() * inv_m;
  }
  if (targets.cols() > 1) out.disagreement = pairwise_disagreement(predictions);
  return out;
}

DiversityReport kv_decomposition(const SoftLearner& model, const Dataset& data, const ExternalQuery& external) {
  const Matrix targets = data.task() == TaskKind::Classification ? one_hot(data.labels) : Matrix(data.labels.targets());
  return kv_decomposition(model.specialist_predictions(data.features, external), model.weights(), targets);
}

Matrix pairwise_disagreement(const std::vector<Matrix>& predictions) {
  const auto K = static_cast<Index>(predictions.size());
  std::vector<std::vector<int>> labels;
  for (const auto& p : predictions) labels.push_back(argmax_rows(p));
  Matrix rho = Matrix::Zero(K, K);
  if (K == 0 || labels[0].empty()) return rho;
  const double m = static_cast<double>(labels[0].size());
  for (Index k = 0; k < K; ++k) {
    for (Index j = k + 1; j < K; ++j) {
      Index differ = 0;
      const auto& a = labels[static_cast<size_t>(k)];
      const auto& b = labels[static_cast<size_t>(j)];
      for (size_t i = 0; i < a.size(); ++i) differ += a[i] != b[i] ? 1 : 0;
      rho(k, j) = rho(j, k) = static_cast<double>(differ) / m;
    }
  }
  return rho;
}

Matrix pairwise_disagreement(const SoftLearner& model, const Matrix& x) {
  if (model.task() != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "pairwise_disagreement needs a classification model");
  }
  return pairwise_disagreement(model.specialist_predictions(x));
}

// --- selective classification ----------------------------------------------

SelectivePrediction selective_from(const std::vector<int>& labels, const Vector& variance, double tau) {
  if (!(tau >= 0.0)) throw Error(ErrorCode::Config, "selective threshold must be non-negative");
  if (static_cast<Index>(labels.size()) != variance.size()) {
    throw Error(ErrorCode::Dimension, "selective_from: label and variance counts differ");
  }
  SelectivePrediction out;
  out.threshold = tau;
  out.labels = labels;
  Index kept = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (variance(static_cast<Index>(i)) > tau) {
      out.labels[i] = kAbstain;
    } else {
      ++kept;
    }
  }
  out.coverage = labels.empty() ? 0.0 : static_cast<double>(kept) / static_cast<double>(labels.size());
  return out;
}

SelectivePrediction selective_predict(const SoftLearner& model, const Matrix& x, double tau) {
  const auto preds = model.specialist_predictions(x);
  if (model.task() != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "selective_predict needs a classification model");
  }
  return selective_from(argmax_rows(combine(preds, model.weights())), weighted_variance(preds, model.weights()), tau);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::Dimension, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SelectivePoint> selective_curve(const std::vector<int>& predicted, const std::vector<int>& truth,
                                            const Vector& variance) {
  if (predicted.size() != truth.size() || static_cast<Index>(predicted.size()) != variance.size()) {
    throw Error(ErrorCode::Dimension, "selective_curve: length mismatch");
  }
  const std::vector<double> v(variance.data(), variance.data() + variance.size());
  std::vector<SelectivePoint> curve;
  for (int decile = 1; decile <= 10; ++decile) {
    SelectivePoint p;
    p.quantile = decile / 10.0;
    p.threshold = quantile(v, p.quantile);
    Index kept = 0, hits = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
      if (v[i] > p.threshold) continue;
      ++kept;
      hits += predicted[i] == truth[i] ? 1 : 0;
    }
    p.coverage = static_cast<double>(kept) / static_cast<double>(predicted.size());
    p.accuracy = kept > 0 ? static_cast<double>(hits) / static_cast<double>(kept) : 0.0;
    curve.push_back(p);
  }
  return curve;
}

// --- immunity ----------------------------------------------------------------

ImmunityReport immunity_probe(const SoftLearner& model, const Matrix& x, double eps, int trials,
                              std::uint64_t seed) {
  if (!(eps > 0.0)) throw Error(ErrorCode::Config, "immunity_probe: eps must be positive");
  if (trials < 1) throw Error(ErrorCode::Config, "immunity_probe: trials must be positive");
  if (model.task() != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "immunity_probe needs a classification model");
  }
  ImmunityReport out;
  const auto& w = model.weights();
  for (size_t k = 0; k < model.specialists().size(); ++k) {
    if (model.specialists()[k].piecewise_constant()) {
      out.immune.push_back(static_cast<Index>(k));
      out.w_immune += w(static_cast<Index>(k));
    }
  }
  out.w_immune = std::clamp(out.w_immune, 0.0, 1.0);

  const Index m = x.rows();
  out.immune_changed.assign(static_cast<size_t>(m), 0);
  out.label_flipped.assign(static_cast<size_t>(m), 0);
  out.immune_carry.assign(static_cast<size_t>(m), 0);
  const auto base = model.specialist_predictions(x);
  const auto base_labels = argmax_rows(combine(base, w));
  Rng rng(seed);
  for (Index q = 0; q < m; ++q) {
    const auto sq = static_cast<size_t>(q);
    bool agree = !out.immune.empty();
    for (Index k : out.immune) {
      if (w(k) > 0.0 && argmax_class(base[static_cast<size_t>(k)].row(q)) != base_labels[sq]) agree = false;
    }
    out.immune_carry[sq] = out.w_immune > 0.5 && agree ? 1 : 0;

    Matrix probes = x.row(q).replicate(trials, 1);
    for (Index t = 0; t < trials; ++t) {
      for (Index j = 0; j < x.cols(); ++j) probes(t, j) += rng.uniform(-eps, eps);
    }
    const auto moved = model.specialist_predictions(probes);
    const auto labels = argmax_rows(combine(moved, w));
    for (Index t = 0; t < trials; ++t) {
      if (labels[static_cast<size_t>(t)] != base_labels[sq]) out.label_flipped[sq] = 1;
      for (Index k : out.immune) {
        if (moved[static_cast<size_t>(k)].row(t) != base[static_cast<size_t>(k)].row(q)) out.immune_changed[sq] = 1;
      }
    }
    if (out.immune_carry[sq] && out.label_flipped[sq]) ++out.carried_flips;
  }
  out.carried_flip_fraction = m > 0 ? static_cast<double>(out.carried_flips) / static_cast<double>(m) : 0.0;
  return out;
}

}  // namespace softlearn
