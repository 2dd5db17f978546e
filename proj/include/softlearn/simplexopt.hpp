#pragma once

#include "softlearn/core.hpp"
#include "softlearn/cvengine.hpp"

#include <vector>

namespace softlearn {

/// A point on the probability simplex: entries >= 0 summing to 1.
using WeightVector = Vector;

/// Least-squares problem over the simplex. Row i*C + c of the design holds
/// the K predictions for sample i, class c.
struct FlattenedLS {
  Matrix design;  // (n*C) x K
  Vector target;  // n*C
  Index n = 0;
  Index K = 0;
  Index C = 0;
};

FlattenedLS flatten(const OofPredictionTensor& tensor, const LabelVector& labels);

/// (1/n) * ||target - design * alpha||^2.
double objective_value(const FlattenedLS& problem, const Eigen::Ref<const Vector>& alpha);

/// Euclidean projection onto the simplex (sorted-threshold algorithm).
Vector project_to_simplex(const Eigen::Ref<const Vector>& v);

/// Snaps entries below 1e-10 to zero and renormalizes.
WeightVector floor_weights(const Eigen::Ref<const Vector>& alpha);

/// Uniform, K vertex-concentrated (0.9 / 0.1/(K-1)) and one accuracy-
/// proportional start (weights proportional to 1/(vertex objective + 1e-12)).
/// For K = 1 the identical starts collapse to a single point.
std::vector<WeightVector> default_initializations(Index K, const Vector& vertex_objectives);

/// Objective of every vertex e_k.
Vector vertex_objectives(const FlattenedLS& problem);

struct SolveReport {
  WeightVector solution;
  double objective = 0.0;
  std::vector<WeightVector> init_solutions;
  std::vector<double> init_objectives;
  int iterations = 0;
  bool converged = false;
  bool rank_deficient = false;
  double min_singular_value = 0.0;
  /// max over the support of (g_k - min g); zero at an exact optimum.
  double kkt_residual = 0.0;
};

/// Gradient of the objective at alpha.
Vector objective_gradient(const FlattenedLS& problem, const Eigen::Ref<const Vector>& alpha);

/// True when every k with alpha_k > 1e-8 has g_k within tol of min g (and
/// hence every other g_k is at least min g).
bool kkt_certificate(const FlattenedLS& problem, const Eigen::Ref<const Vector>& alpha,
                     double tol = 1e-6);

/// Non-convergence carries the best iterate.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, WeightVector best)
      : Error(ErrorCode::NonConvergence, what), best_(std::move(best)) {}
  const WeightVector& best() const { return best_; }

 private:
  WeightVector best_;
};

/// Projected gradient with exact line search and an active-set polish, run
/// from each initialization. The reported solution is the lowest objective
/// found (ties to the lowest start index), never worse than any start or
/// vertex.
SolveReport solve_simplex_ls(const FlattenedLS& problem, const std::vector<WeightVector>& initializations);

/// Solve with default_initializations.
SolveReport solve_simplex_ls(const FlattenedLS& problem);

}  // namespace softlearn
