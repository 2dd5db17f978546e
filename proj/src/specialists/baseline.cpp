#include "models.hpp"

namespace softlearn::detail {

namespace {

class ConstantModel final : public Model {
 public:
  explicit ConstantModel(Vector value) : value_(std::move(value)) {}
  Matrix predict(const Matrix& x) const override { return value_.transpose().replicate(x.rows(), 1); }
  json state() const override { return {{"value", vector_to_json(value_)}}; }

 private:
  Vector value_;
};

}  // namespace

std::unique_ptr<Model> train_baseline(const Dataset& data) {
  if (data.task() == TaskKind::Classification) {
    return std::make_unique<ConstantModel>(one_hot(data.labels).colwise().mean().transpose());
  }
  return std::make_unique<ConstantModel>(Vector::Constant(1, data.labels.targets().mean()));
}

std::unique_ptr<Model> restore_baseline(const json& state) {
  return std::make_unique<ConstantModel>(vector_from_json(state.at("value")));
}

}  // namespace softlearn::detail
