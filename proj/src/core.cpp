#include "softlearn/core.hpp"

#include <algorithm>

namespace softlearn {

const char* to_string(TaskKind task) {
  return task == TaskKind::Classification ? "classification" : "regression";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "classification") return TaskKind::Classification;
  if (name == "regression") return TaskKind::Regression;
  throw Error(ErrorCode::Config, "unknown task kind '" + name + "'");
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::TaskMismatch: return "task-mismatch";
    case ErrorCode::Config: return "config";
    case ErrorCode::DegenerateTraining: return "degenerate-training";
    case ErrorCode::DegenerateTarget: return "degenerate-target";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::Coverage: return "coverage";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Protocol: return "protocol";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

LabelVector LabelVector::classification(std::vector<int> labels, int n_classes) {
  if (n_classes < 1) {
    throw Error(ErrorCode::Config, "classification labels need C >= 1");
  }
  for (int y : labels) {
    if (y < 0 || y >= n_classes) {
      throw Error(ErrorCode::Config, "label " + std::to_string(y) +
                                         " outside {0.." +
                                         std::to_string(n_classes - 1) + "}");
    }
  }
  LabelVector out;
  out.task_ = TaskKind::Classification;
  out.n_classes_ = n_classes;
  out.classes_ = std::move(labels);
  return out;
}

LabelVector LabelVector::regression(Vector targets) {
  if (!targets.allFinite()) {
    throw Error(ErrorCode::Numeric, "regression targets must be finite");
  }
  LabelVector out;
  out.task_ = TaskKind::Regression;
  out.n_classes_ = 1;
  out.targets_ = std::move(targets);
  return out;
}

Index LabelVector::size() const {
  return task_ == TaskKind::Classification
             ? static_cast<Index>(classes_.size())
             : targets_.size();
}

int LabelVector::n_classes() const { return n_classes_; }

const std::vector<int>& LabelVector::classes() const {
  if (task_ != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "class labels requested from regression targets");
  }
  return classes_;
}

const Vector& LabelVector::targets() const {
  if (task_ != TaskKind::Regression) {
    throw Error(ErrorCode::TaskMismatch, "real targets requested from class labels");
  }
  return targets_;
}

LabelVector LabelVector::subset(std::span<const Index> rows) const {
  LabelVector out;
  out.task_ = task_;
  out.n_classes_ = n_classes_;
  if (task_ == TaskKind::Classification) {
    out.classes_.reserve(rows.size());
    for (Index r : rows) out.classes_.push_back(classes_.at(static_cast<size_t>(r)));
  } else {
    out.targets_.resize(static_cast<Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) out.targets_(static_cast<Index>(i)) = targets_(rows[i]);
  }
  return out;
}

void LabelVector::require_all_classes() const {
  if (task_ != TaskKind::Classification) return;
  std::vector<int> counts(static_cast<size_t>(n_classes_), 0);
  for (int y : classes_) ++counts[static_cast<size_t>(y)];
  for (int c = 0; c < n_classes_; ++c) {
    if (counts[static_cast<size_t>(c)] == 0) {
      throw Error(ErrorCode::Config, "class " + std::to_string(c) + " never occurs");
    }
  }
}

bool LabelVector::operator==(const LabelVector& other) const {
  if (task_ != other.task_ || n_classes_ != other.n_classes_) return false;
  if (task_ == TaskKind::Classification) return classes_ == other.classes_;
  return targets_.size() == other.targets_.size() && targets_ == other.targets_;
}

Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  return Dataset{name, select_rows(features, rows), labels.subset(rows)};
}

void Dataset::validate() const {
  if (features.rows() != labels.size()) {
    throw Error(ErrorCode::Dimension, "dataset '" + name + "': " +
                                          std::to_string(features.rows()) +
                                          " feature rows vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  if (n() < 2 || d() < 1) {
    throw Error(ErrorCode::Dimension, "dataset '" + name + "' needs n >= 2 and d >= 1");
  }
  if (!features.allFinite()) {
    throw Error(ErrorCode::Numeric, "dataset '" + name + "' has non-finite features");
  }
  labels.require_all_classes();
}

Matrix one_hot(const LabelVector& labels) {
  if (labels.task() != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "one_hot: regression labels");
  }
  const auto& y = labels.classes();
  Matrix out = Matrix::Zero(static_cast<Index>(y.size()), labels.n_classes());
  for (size_t i = 0; i < y.size(); ++i) out(static_cast<Index>(i), y[i]) = 1.0;
  return out;
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
  std::vector<int> out(static_cast<size_t>(probabilities.rows()));
  for (Index i = 0; i < probabilities.rows(); ++i) {
    out[static_cast<size_t>(i)] = argmax_class(probabilities.row(i));
  }
  return out;
}

void clip_and_renormalize(Matrix& probabilities, double floor) {
  for (Index i = 0; i < probabilities.rows(); ++i) {
    auto row = probabilities.row(i);
    for (Index c = 0; c < row.size(); ++c) {
      double v = row(c);
      if (!(v >= floor)) v = floor;  // also catches NaN
      if (v > 1.0) v = 1.0;
      row(c) = v;
    }
    row /= row.sum();
  }
}

}  // namespace softlearn
