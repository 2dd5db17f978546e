#include "models.hpp"

#include <cmath>
#include <numbers>

namespace softlearn::detail {

namespace {

constexpr double kAbsentClass = -1e300;

class NaiveBayesModel final : public Model {
 public:
  NaiveBayesModel(Matrix means, Matrix variances, Vector log_prior)
      : means_(std::move(means)), variances_(std::move(variances)), log_prior_(std::move(log_prior)) {}

  Matrix predict(const Matrix& x) const override {
    const Index c_count = means_.rows();
    Matrix out(x.rows(), c_count);
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index c = 0; c < c_count; ++c) {
        const auto diff = x.row(i).array() - means_.row(c).array();
        out(i, c) = log_prior_(c) -
                    0.5 * ((2.0 * std::numbers::pi * variances_.row(c).array()).log() +
                           diff.square() / variances_.row(c).array())
                              .sum();
      }
      const double m = out.row(i).maxCoeff();
      out.row(i) = (out.row(i).array() - m).exp().matrix();
      out.row(i) /= out.row(i).sum();
    }
    return out;
  }

  json state() const override {
    return {{"means", matrix_to_json(means_)}, {"variances", matrix_to_json(variances_)},
            {"log_prior", vector_to_json(log_prior_)}};
  }

 private:
  Matrix means_;
  Matrix variances_;
  Vector log_prior_;  // kAbsentClass for classes missing from training
};

}  // namespace

std::unique_ptr<Model> train_naive_bayes(const NaiveBayesParams& params, const Dataset& data) {
  const Index d = data.d();
  const int c_count = data.labels.n_classes();
  const auto& y = data.labels.classes();
  // Variance floor is relative to the largest feature variance.
  const Eigen::RowVectorXd mean_all = data.features.colwise().mean();
  const double max_var = ((data.features.rowwise() - mean_all).array().square().colwise().sum() /
                          static_cast<double>(data.n()))
                             .maxCoeff();
  const double epsilon = params.var_smoothing * (max_var > 0.0 ? max_var : 1.0);

  Matrix means = Matrix::Zero(c_count, d);
  Matrix variances = Matrix::Zero(c_count, d);
  Vector counts = Vector::Zero(c_count);
  for (Index i = 0; i < data.n(); ++i) {
    means.row(y[static_cast<size_t>(i)]) += data.features.row(i);
    counts(y[static_cast<size_t>(i)]) += 1.0;
  }
  for (Index c = 0; c < c_count; ++c) {
    if (counts(c) > 0) means.row(c) /= counts(c);
  }
  for (Index i = 0; i < data.n(); ++i) {
    const int c = y[static_cast<size_t>(i)];
    variances.row(c) += (data.features.row(i) - means.row(c)).array().square().matrix();
  }
  Vector log_prior(c_count);
  for (Index c = 0; c < c_count; ++c) {
    if (counts(c) > 0) variances.row(c) /= counts(c);
    variances.row(c).array() += epsilon;
    log_prior(c) = counts(c) > 0 ? std::log(counts(c) / static_cast<double>(data.n()))
                                 : kAbsentClass;
  }
  return std::make_unique<NaiveBayesModel>(std::move(means), std::move(variances), std::move(log_prior));
}

std::unique_ptr<Model> restore_naive_bayes(const json& state) {
  Vector log_prior = vector_from_json(state.at("log_prior"));
  return std::make_unique<NaiveBayesModel>(matrix_from_json(state.at("means")),
                                           matrix_from_json(state.at("variances")), std::move(log_prior));
}

}  // namespace softlearn::detail
