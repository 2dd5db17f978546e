#pragma once

#include "softlearn/core.hpp"
#include "softlearn/cvengine.hpp"
#include "softlearn/simplexopt.hpp"
#include "softlearn/specialists.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace softlearn {

struct SoftLearnerOptions {
  int n_folds = 0;  // 0 selects default_fold_count(n)
  std::uint64_t seed = 42;
  int jobs = 1;
  bool keep_oof = true;
  bool record_digests = false;
};

/// Per-specialist predictions supplied by the caller for external specialists,
/// keyed by library index.
using ExternalQuery = std::map<Index, Matrix>;

/// Convex combination of K specialists: f(x) = sum_k alpha_k f_k(x).
class SoftLearner {
 public:
  SoftLearner() = default;

  /// Phase 1 out-of-fold assembly, phase 2 simplex solve, phase 3 refit of
  /// every specialist on all data with a full-data standardizer.
  static SoftLearner fit(const SpecialistLibrary& library, const Dataset& data,
                         const SoftLearnerOptions& options = {});

  /// Assembles a model from already fitted specialists (external entries
  /// may be default-constructed).
  static SoftLearner from_parts(SpecialistLibrary library, TaskKind task, int n_classes,
                                Standardizer standardizer, std::vector<TrainedSpecialist> specialists,
                                WeightVector weights);

  const SpecialistLibrary& library() const { return library_; }
  const std::vector<TrainedSpecialist>& specialists() const { return specialists_; }
  const WeightVector& weights() const { return weights_; }
  TaskKind task() const { return task_; }
  int n_classes() const { return n_classes_; }
  Index n_features() const { return standardizer_.size(); }
  const Standardizer& standardizer() const { return standardizer_; }
  std::uint64_t seed() const { return seed_; }
  const SolveReport& solve_report() const { return report_; }
  const FlattenedLS& problem() const { return problem_; }
  const std::optional<OofPredictionTensor>& oof() const { return oof_; }
  const FoldAssignment& folds() const { return folds_; }
  /// Per (k, fold) digests of phase 1 models followed by phase 3 digests, when recorded.
  const std::vector<std::uint64_t>& state_digests() const { return digests_; }
  /// Wall-clock seconds of each phase 3 fit.
  const std::vector<double>& refit_seconds() const { return refit_seconds_; }

  /// Drops the retained out-of-fold diagnostics.
  void slim();

  /// Per-specialist n x C predictions on raw (unstandardized) features.
  std::vector<Matrix> specialist_predictions(const Matrix& x, const ExternalQuery& external = {}) const;

  /// Weighted sum of specialist predictions (n x C; regression n x 1).
  Matrix predict_matrix(const Matrix& x, const ExternalQuery& external = {}) const;
  Matrix predict_proba(const Matrix& x, const ExternalQuery& external = {}) const;
  std::vector<int> predict_labels(const Matrix& x, const ExternalQuery& external = {}) const;
  Vector predict(const Matrix& x, const ExternalQuery& external = {}) const;

  /// V(x) = sum_k alpha_k ||f_k(x) - f(x)||^2. For regression the squared
  /// difference of scalar predictions.
  Vector uncertainty(const Matrix& x, const ExternalQuery& external = {}) const;

 private:
  void check_input(const Matrix& x) const;

  SpecialistLibrary library_;
  TaskKind task_ = TaskKind::Classification;
  int n_classes_ = 0;
  std::uint64_t seed_ = 0;
  Standardizer standardizer_;
  std::vector<TrainedSpecialist> specialists_;
  WeightVector weights_;
  SolveReport report_;
  FlattenedLS problem_;
  FoldAssignment folds_;
  std::optional<OofPredictionTensor> oof_;
  std::vector<std::uint64_t> digests_;
  std::vector<double> refit_seconds_;
};

SoftLearner fit_soft_learner(const SpecialistLibrary& library, const Dataset& data, int n_folds,
                             std::uint64_t master_seed);

/// sum_k alpha_k P_k.
Matrix combine(const std::vector<Matrix>& predictions, const Eigen::Ref<const Vector>& weights);

/// Weighted prediction variance from per-specialist predictions.
Vector weighted_variance(const std::vector<Matrix>& predictions, const Eigen::Ref<const Vector>& weights);

/// Pairwise form 1/2 sum_{k,j} alpha_k alpha_j ||f_k - f_j||^2.
Vector pairwise_variance(const std::vector<Matrix>& predictions, const Eigen::Ref<const Vector>& weights);

// --- diversity --------------------------------------------------------------

struct DiversityReport {
  double mean_error = 0.0;      // weighted mean individual error
  double ambiguity = 0.0;
  double ensemble_error = 0.0;
  Matrix disagreement;          // K x K hard-label disagreement rates (classification)
};

/// Squared-error decomposition E_ens = E_bar - A, errors averaged over rows
/// and summed over columns. Targets are one-hot rows for classification.
DiversityReport kv_decomposition(const std::vector<Matrix>& predictions,
                                 const Eigen::Ref<const Vector>& weights, const Matrix& targets);
DiversityReport kv_decomposition(const SoftLearner& model, const Dataset& data,
                                 const ExternalQuery& external = {});

/// Fraction of rows where the argmax labels of two specialists differ.
Matrix pairwise_disagreement(const std::vector<Matrix>& predictions);
Matrix pairwise_disagreement(const SoftLearner& model, const Matrix& x);

// --- selective classification ----------------------------------------------

inline constexpr int kAbstain = -1;

struct SelectivePrediction {
  std::vector<int> labels;  // kAbstain where V(x) > threshold
  double threshold = 0.0;
  double coverage = 0.0;
};

SelectivePrediction selective_predict(const SoftLearner& model, const Matrix& x, double tau);
SelectivePrediction selective_from(const std::vector<int>& labels, const Vector& variance, double tau);

struct SelectivePoint {
  double quantile = 0.0;
  double threshold = 0.0;
  double coverage = 0.0;
  double accuracy = 0.0;  // on non-abstained rows; 0 when nothing is kept
};

/// Linear-interpolation quantile of the values.
double quantile(std::vector<double> values, double q);

/// Accuracy on kept rows for tau at the 10%, 20%, ..., 100% quantiles of V.
std::vector<SelectivePoint> selective_curve(const std::vector<int>& predicted, const std::vector<int>& truth,
                                            const Vector& variance);

// --- immunity ----------------------------------------------------------------

struct ImmunityReport {
  std::vector<Index> immune;  // piecewise-constant specialists
  double w_immune = 0.0;
  std::vector<std::uint8_t> immune_changed;  // per query: any immune output moved
  std::vector<std::uint8_t> label_flipped;   // per query: ensemble argmax moved
  std::vector<std::uint8_t> immune_carry;    // per query: w_immune > 0.5 and immune specialists agree with the label
  Index carried_flips = 0;                   // queries that are carried and flipped
  double carried_flip_fraction = 0.0;
};

/// Random perturbations with ||eta||_inf <= eps around each query.
ImmunityReport immunity_probe(const SoftLearner& model, const Matrix& x, double eps, int trials,
                              std::uint64_t seed = 42);

// --- serialization ------------------------------------------------------------

/// Binary/JSON hybrid: a magic line, one JSON header line (library, weights,
/// task, seed, standardizer) and one length-prefixed CBOR state blob per
/// specialist.
void save_model(const SoftLearner& model, std::ostream& out);
SoftLearner load_model(std::istream& in);
void save_model(const SoftLearner& model, const std::string& path);
SoftLearner load_model(const std::string& path);

}  // namespace softlearn
