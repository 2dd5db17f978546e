#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace softlearn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class TaskKind { Classification, Regression };

const char* to_string(TaskKind task);
TaskKind task_from_string(const std::string& name);

enum class ErrorCode {
  Dimension,
  TaskMismatch,
  Config,
  DegenerateTraining,
  DegenerateTarget,
  Numeric,
  NonConvergence,
  Coverage,
  Parse,
  Protocol,
  Io,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Class indices in {0..C-1} for classification, real targets for regression.
class LabelVector {
 public:
  LabelVector() = default;

  static LabelVector classification(std::vector<int> labels, int n_classes);
  static LabelVector regression(Vector targets);

  TaskKind task() const { return task_; }
  Index size() const;
  int n_classes() const;  // 1 for regression
  const std::vector<int>& classes() const;
  const Vector& targets() const;

  LabelVector subset(std::span<const Index> rows) const;
  /// Throws unless every class in {0..C-1} occurs at least once.
  void require_all_classes() const;

  bool operator==(const LabelVector& other) const;

 private:
  TaskKind task_ = TaskKind::Classification;
  int n_classes_ = 0;
  std::vector<int> classes_;
  Vector targets_;
};

struct Dataset {
  std::string name;
  Matrix features;
  LabelVector labels;

  TaskKind task() const { return labels.task(); }
  Index n() const { return features.rows(); }
  Index d() const { return features.cols(); }

  Dataset subset(std::span<const Index> rows) const;
  /// Checks the full-dataset invariants (n >= 2, d >= 1, finiteness, class coverage).
  void validate() const;
};

Matrix select_rows(const Matrix& m, std::span<const Index> rows);

// ---------------------------------------------------------------------------
// Standardization. Population standard deviation; columns whose scale falls
// below kConstantScale are left unscaled.

inline constexpr double kConstantScale = 1e-12;

template <typename Scalar>
struct StandardizerParams {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scale;

  Index size() const { return mean.size(); }
  bool operator==(const StandardizerParams&) const = default;
};

using Standardizer = StandardizerParams<double>;

template <typename Derived>
StandardizerParams<typename Derived::Scalar> fit_standardizer(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.rows() < 1 || x.cols() < 1) {
    throw Error(ErrorCode::Dimension, "fit_standardizer: empty matrix");
  }
  StandardizerParams<Scalar> params;
  params.mean = x.colwise().mean().transpose();
  params.scale.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const Scalar var =
        (x.col(j).array() - params.mean(j)).square().sum() / Scalar(x.rows());
    const Scalar sd = std::sqrt(var);
    params.scale(j) = sd < Scalar(kConstantScale) ? Scalar(1) : sd;
  }
  return params;
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> apply_standardizer(
    const StandardizerParams<Scalar>& params,
    const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != params.size()) {
    throw Error(ErrorCode::Dimension,
                "apply_standardizer: expected " + std::to_string(params.size()) +
                    " columns, got " + std::to_string(x.cols()));
  }
  return ((x.rowwise() - params.mean.transpose()).array().rowwise() /
          params.scale.transpose().array())
      .matrix();
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> invert_standardizer(
    const StandardizerParams<Scalar>& params,
    const Eigen::MatrixBase<Derived>& z) {
  if (z.cols() != params.size()) {
    throw Error(ErrorCode::Dimension, "invert_standardizer: column mismatch");
  }
  return ((z.array().rowwise() * params.scale.transpose().array()).matrix()
              .rowwise() +
          params.mean.transpose());
}

// ---------------------------------------------------------------------------

/// n x C indicator matrix; every row sums to exactly 1.
Matrix one_hot(const LabelVector& labels);

/// Index of the largest entry, lowest index on ties.
template <typename Derived>
int argmax_class(const Eigen::DenseBase<Derived>& probabilities) {
  if (probabilities.size() == 0) {
    throw Error(ErrorCode::Dimension, "argmax_class: empty vector");
  }
  int best = 0;
  for (Index c = 1; c < probabilities.size(); ++c) {
    if (probabilities(c) > probabilities(best)) best = static_cast<int>(c);
  }
  return best;
}

std::vector<int> argmax_rows(const Matrix& probabilities);

/// Clips to [floor, 1] and renormalizes each row onto the simplex.
void clip_and_renormalize(Matrix& probabilities, double floor = 1e-12);

}  // namespace softlearn
