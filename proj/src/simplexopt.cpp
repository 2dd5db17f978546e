#include "softlearn/simplexopt.hpp"

#include <algorithm>
#include <numeric>

namespace softlearn {

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kSupport = 1e-8;
constexpr double kWeightFloor = 1e-10;
constexpr double kRankTolerance = 1e-8;

}  // namespace

FlattenedLS flatten(const OofPredictionTensor& tensor, const LabelVector& labels) {
  if (!tensor.complete()) throw Error(ErrorCode::Coverage, "flatten: out-of-fold tensor is incomplete");
  if (labels.size() != tensor.n) throw Error(ErrorCode::Dimension, "flatten: label count differs from tensor rows");
  FlattenedLS out;
  out.n = tensor.n;
  out.K = tensor.K;
  out.C = tensor.C;
  out.design.resize(out.n * out.C, out.K);
  for (Index k = 0; k < out.K; ++k) {
    const Matrix& slice = tensor.slices[static_cast<size_t>(k)];
    for (Index i = 0; i < out.n; ++i) {
      for (Index c = 0; c < out.C; ++c) out.design(i * out.C + c, k) = slice(i, c);
    }
  }
  if (labels.task() == TaskKind::Classification) {
    if (labels.n_classes() != out.C) throw Error(ErrorCode::Dimension, "flatten: class count differs from tensor");
    out.target = Vector::Zero(out.n * out.C);
    const auto& y = labels.classes();
    for (Index i = 0; i < out.n; ++i) out.target(i * out.C + y[static_cast<size_t>(i)]) = 1.0;
  } else {
    if (out.C != 1) throw Error(ErrorCode::Dimension, "flatten: regression tensor must have C = 1");
    out.target = labels.targets();
  }
  return out;
}

double objective_value(const FlattenedLS& problem, const Eigen::Ref<const Vector>& alpha) {
  if (alpha.size() != problem.K) throw Error(ErrorCode::Dimension, "objective_value: weight length differs from K");
  return (problem.target - problem.design * alpha).squaredNorm() / static_cast<double>(problem.n);
}

Vector objective_gradient(const FlattenedLS& problem, const Eigen::Ref<const Vector>& alpha) {
  return -2.0 / static_cast<double>(problem.n) *
         (problem.design.transpose() * (problem.target - problem.design * alpha));
}

Vector project_to_simplex(const Eigen::Ref<const Vector>& v) {
  const Index K = v.size();
  std::vector<double> u(v.data(), v.data() + K);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (Index j = 0; j < K; ++j) {
    cumulative += u[static_cast<size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<size_t>(j)] - t > 0) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

WeightVector floor_weights(const Eigen::Ref<const Vector>& alpha) {
  Vector w = alpha.unaryExpr([](double a) { return a < kWeightFloor ? 0.0 : a; });
  const double total = w.sum();
  if (total <= 0.0) {
    // Degenerate input; fall back to the largest entry.
    Index best = 0;
    alpha.maxCoeff(&best);
    w.setZero();
    w(best) = 1.0;
    return w;
  }
  return w / total;
}

Vector vertex_objectives(const FlattenedLS& problem) {
  Vector out(problem.K);
  for (Index k = 0; k < problem.K; ++k) {
    out(k) = (problem.target - problem.design.col(k)).squaredNorm() / static_cast<double>(problem.n);
  }
  return out;
}

std::vector<WeightVector> default_initializations(Index K, const Vector& vertex_obj) {
  if (K < 1) throw Error(ErrorCode::Config, "default_initializations: K must be at least 1");
  if (vertex_obj.size() != K) throw Error(ErrorCode::Dimension, "default_initializations: need K vertex objectives");
  if (K == 1) return {Vector::Ones(1)};
  std::vector<WeightVector> inits;
  inits.push_back(Vector::Constant(K, 1.0 / static_cast<double>(K)));
  for (Index k = 0; k < K; ++k) {
    Vector w = Vector::Constant(K, 0.1 / static_cast<double>(K - 1));
    w(k) = 0.9;
    inits.push_back(w);
  }
  const Vector inverse = (vertex_obj.array() + 1e-12).inverse();
  inits.push_back(inverse / inverse.sum());
  return inits;
}

bool kkt_certificate(const FlattenedLS& problem, const Eigen::Ref<const Vector>& alpha, double tol) {
  const Vector g = objective_gradient(problem, alpha);
  const double gmin = g.minCoeff();
  for (Index k = 0; k < alpha.size(); ++k) {
    if (alpha(k) > kSupport && g(k) - gmin > tol) return false;
  }
  return true;
}

namespace {

struct Quadratic {
  Matrix gram;  // D^T D / n
  Vector lin;   // D^T t / n
  double step;  // 1 / Lipschitz constant of the gradient

  Vector gradient(const Vector& a) const { return 2.0 * (gram * a - lin); }
};

double kkt_residual(const Vector& alpha, const Vector& g) {
  const double gmin = g.minCoeff();
  double r = 0.0;
  for (Index k = 0; k < alpha.size(); ++k) {
    if (alpha(k) > kSupport) r = std::max(r, g(k) - gmin);
  }
  return r;
}

/// Minimizes the quadratic over the affine hull of the current support and
/// moves toward that minimizer as far as feasibility allows.
bool polish(const Quadratic& q, Vector& alpha) {
  std::vector<Index> support;
  for (Index k = 0; k < alpha.size(); ++k) {
    if (alpha(k) > 0.0) support.push_back(k);
  }
  const auto s = static_cast<Index>(support.size());
  if (s < 1) return false;
  Matrix kkt = Matrix::Zero(s + 1, s + 1);
  Vector rhs(s + 1);
  for (Index a = 0; a < s; ++a) {
    for (Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * q.gram(support[static_cast<size_t>(a)], support[static_cast<size_t>(b)]);
    kkt(a, s) = kkt(s, a) = 1.0;
    rhs(a) = 2.0 * q.lin(support[static_cast<size_t>(a)]);
  }
  rhs(s) = 1.0;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
  const Vector sol = cod.solve(rhs);
  if (!sol.allFinite() || (kkt * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) return false;

  Vector target = Vector::Zero(alpha.size());
  for (Index a = 0; a < s; ++a) target(support[static_cast<size_t>(a)]) = sol(a);
  const Vector dir = target - alpha;
  double t = 1.0;
  for (Index k = 0; k < alpha.size(); ++k) {
    if (dir(k) < 0.0) t = std::min(t, -alpha(k) / dir(k));
  }
  if (t <= 0.0) return false;
  Vector next = alpha + t * dir;
  next = next.cwiseMax(0.0);
  next /= next.sum();
  alpha = next;
  return true;
}

double quad_value(const Quadratic& q, const Vector& a) { return a.dot(q.gram * a) - 2.0 * q.lin.dot(a); }

struct RunResult {
  Vector alpha;
  int iterations = 0;
  double residual = 0.0;
};

RunResult run_from(const Quadratic& q, const Vector& start) {
  RunResult out;
  Vector alpha = project_to_simplex(start);
  Vector g = q.gradient(alpha);
  for (int it = 0; it < kMaxIterations; ++it) {
    out.iterations = it + 1;
    if (kkt_residual(alpha, g) <= 1e-12) break;
    // Projected gradient direction, then the exact minimizer on the segment.
    const Vector dir = project_to_simplex(alpha - q.step * g) - alpha;
    const double curvature = 2.0 * dir.dot(q.gram * dir);
    const double slope = g.dot(dir);
    if (dir.lpNorm<Eigen::Infinity>() <= 1e-16 || slope >= 0.0) break;
    const double t = curvature > 0.0 ? std::clamp(-slope / curvature, 0.0, 1.0) : 1.0;
    alpha = (alpha + t * dir).cwiseMax(0.0);
    alpha /= alpha.sum();

    Vector polished = alpha;
    if (polish(q, polished) && quad_value(q, polished) <= quad_value(q, alpha)) alpha = polished;
    g = q.gradient(alpha);
  }
  out.alpha = alpha;
  out.residual = kkt_residual(alpha, g);
  return out;
}

}  // namespace

SolveReport solve_simplex_ls(const FlattenedLS& problem, const std::vector<WeightVector>& initializations) {
  if (problem.K < 1) throw Error(ErrorCode::Config, "solve_simplex_ls: K must be at least 1");
  if (initializations.empty()) throw Error(ErrorCode::Config, "solve_simplex_ls: no initializations");
  if (problem.design.cols() != problem.K || problem.design.rows() != problem.target.size()) {
    throw Error(ErrorCode::Dimension, "solve_simplex_ls: design and target disagree");
  }
  if (!problem.design.allFinite() || !problem.target.allFinite()) {
    throw Error(ErrorCode::Numeric, "solve_simplex_ls: non-finite design or target");
  }
  for (const auto& init : initializations) {
    if (init.size() != problem.K) throw Error(ErrorCode::Dimension, "solve_simplex_ls: initialization length differs from K");
  }

  SolveReport report;
  const double inv_n = 1.0 / static_cast<double>(problem.n);
  Quadratic q;
  q.gram = problem.design.transpose() * problem.design * inv_n;
  q.lin = problem.design.transpose() * problem.target * inv_n;
  const double lipschitz = 2.0 * Eigen::SelfAdjointEigenSolver<Matrix>(q.gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  q.step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  const Eigen::BDCSVD<Matrix> svd(problem.design);
  report.min_singular_value = svd.singularValues().size() == problem.K ? svd.singularValues().minCoeff() : 0.0;
  report.rank_deficient = report.min_singular_value < kRankTolerance;

  Vector best;
  double best_obj = std::numeric_limits<double>::infinity();
  double worst_residual = 0.0;
  for (const auto& init : initializations) {
    const RunResult run = run_from(q, init);
    const Vector w = floor_weights(run.alpha);
    const double obj = objective_value(problem, w);
    report.init_solutions.push_back(w);
    report.init_objectives.push_back(obj);
    report.iterations += run.iterations;
    worst_residual = std::max(worst_residual, run.residual);
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  }
  // Starts and vertices are feasible, so the answer is never worse than any of them.
  for (const auto& init : initializations) {
    const Vector w = project_to_simplex(init);
    const double obj = objective_value(problem, w);
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
  }
  for (Index k = 0; k < problem.K; ++k) {
    const Vector e = Vector::Unit(problem.K, k);
    const double obj = objective_value(problem, e);
    if (obj < best_obj) {
      best_obj = obj;
      best = e;
    }
  }

  report.solution = best;
  report.objective = best_obj;
  report.kkt_residual = kkt_residual(best, objective_gradient(problem, best));
  report.converged = kkt_certificate(problem, best);
  if (!report.converged) {
    throw NonConvergenceError("solve_simplex_ls: KKT certificate not met within the iteration budget (residual " +
                                  std::to_string(report.kkt_residual) + ")",
                              best);
  }
  return report;
}

SolveReport solve_simplex_ls(const FlattenedLS& problem) {
  return solve_simplex_ls(problem, default_initializations(problem.K, vertex_objectives(problem)));
}

}  // namespace softlearn
