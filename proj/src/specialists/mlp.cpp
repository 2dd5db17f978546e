#include "models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softlearn::detail {

namespace {

struct Layer {
  Matrix weights;  // fan_in x fan_out
  Vector bias;
};

struct Network {
  std::vector<Layer> layers;

  /// Activations per layer; the last entry holds raw output scores.
  void forward(const Matrix& x, std::vector<Matrix>& acts) const {
    acts.resize(layers.size() + 1);
    acts[0] = x;
    for (size_t l = 0; l < layers.size(); ++l) {
      acts[l + 1] = (acts[l] * layers[l].weights).rowwise() + layers[l].bias.transpose();
      if (l + 1 < layers.size()) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
    }
  }

  Matrix scores(const Matrix& x) const {
    std::vector<Matrix> acts;
    forward(x, acts);
    return acts.back();
  }
};

void softmax_rows(Matrix& z) {
  for (Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
}

class MlpModel final : public Model {
 public:
  MlpModel(TaskKind task, Network net, double y_mean, double y_scale)
      : task_(task), net_(std::move(net)), y_mean_(y_mean), y_scale_(y_scale) {}

  Matrix predict(const Matrix& x) const override {
    Matrix z = net_.scores(x);
    if (task_ == TaskKind::Classification) {
      softmax_rows(z);
      return z;
    }
    return (z.array() * y_scale_ + y_mean_).matrix();
  }

  json state() const override {
    json layers = json::array();
    for (const auto& l : net_.layers) {
      layers.push_back({{"weights", matrix_to_json(l.weights)}, {"bias", vector_to_json(l.bias)}});
    }
    return {{"layers", std::move(layers)}, {"y_mean", y_mean_}, {"y_scale", y_scale_}};
  }

 private:
  TaskKind task_;
  Network net_;
  double y_mean_;
  double y_scale_;
};

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;
  long step = 0;
};

class Trainer {
 public:
  Trainer(const MlpParams& params, bool classification, Index n_outputs)
      : params_(params), classification_(classification), n_outputs_(n_outputs) {}

  Network initial(Index n_inputs, Rng& rng) const {
    Network net;
    Index fan_in = n_inputs;
    std::vector<Index> widths(params_.hidden.begin(), params_.hidden.end());
    widths.push_back(n_outputs_);
    for (Index fan_out : widths) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Layer layer;
      layer.weights.resize(fan_in, fan_out);
      for (Index j = 0; j < fan_out; ++j) {
        for (Index i = 0; i < fan_in; ++i) layer.weights(i, j) = rng.uniform(-limit, limit);
      }
      layer.bias = Vector::Zero(fan_out);
      net.layers.push_back(std::move(layer));
      fan_in = fan_out;
    }
    return net;
  }

  /// One Adam step on a mini-batch; returns the batch loss.
  double step(Network& net, AdamState& adam, const Matrix& x, const Matrix& target) const {
    std::vector<Matrix> acts;
    net.forward(x, acts);
    const double inv_m = 1.0 / static_cast<double>(x.rows());
    Matrix delta = acts.back();
    double loss = 0.0;
    if (classification_) {
      softmax_rows(delta);
      loss = -(target.array() * delta.array().max(1e-300).log()).sum() * inv_m;
      delta -= target;
    } else {
      delta -= target;
      loss = 0.5 * delta.squaredNorm() * inv_m;
    }
    delta *= inv_m;
    ++adam.step;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
    const double lr = params_.learning_rate * std::sqrt(c2) / c1;
    for (size_t l = net.layers.size(); l-- > 0;) {
      const Matrix gw = acts[l].transpose() * delta;
      const Vector gb = delta.colwise().sum().transpose();
      if (l > 0) {
        delta = (delta * net.layers[l].weights.transpose()).cwiseProduct(
            (acts[l].array() > 0.0).cast<double>().matrix());
      }
      adam.mw[l] = b1 * adam.mw[l] + (1 - b1) * gw;
      adam.vw[l] = b2 * adam.vw[l] + (1 - b2) * gw.cwiseAbs2();
      adam.mb[l] = b1 * adam.mb[l] + (1 - b1) * gb;
      adam.vb[l] = b2 * adam.vb[l] + (1 - b2) * gb.cwiseAbs2();
      net.layers[l].weights.array() -= lr * adam.mw[l].array() / (adam.vw[l].array().sqrt() + eps);
      net.layers[l].bias.array() -= lr * adam.mb[l].array() / (adam.vb[l].array().sqrt() + eps);
    }
    return loss;
  }

  double score(const Network& net, const Matrix& x, const Matrix& target) const {
    const Matrix z = net.scores(x);
    if (classification_) {
      Index hits = 0;
      for (Index i = 0; i < x.rows(); ++i) {
        hits += argmax_class(z.row(i)) == argmax_class(target.row(i)) ? 1 : 0;
      }
      return static_cast<double>(hits) / static_cast<double>(x.rows());
    }
    const double ss_res = (z - target).squaredNorm();
    const double ss_tot = (target.array() - target.mean()).square().sum();
    return ss_tot > 0 ? 1.0 - ss_res / ss_tot : -ss_res;
  }

 private:
  const MlpParams& params_;
  bool classification_;
  Index n_outputs_;
};

}  // namespace

std::unique_ptr<Model> train_mlp(const MlpParams& params, const Dataset& data, std::uint64_t seed) {
  const bool clf = data.task() == TaskKind::Classification;
  const Index n = data.n();
  Matrix target;
  double y_mean = 0.0, y_scale = 1.0;
  if (clf) {
    target = one_hot(data.labels);
  } else {
    const Vector& y = data.labels.targets();
    y_mean = y.mean();
    const double sd = std::sqrt((y.array() - y_mean).square().mean());
    // A constant target trains on zeros and is reproduced exactly.
    const double train_scale = sd > kConstantScale ? sd : 1.0;
    y_scale = sd > kConstantScale ? sd : 0.0;
    target = ((y.array() - y_mean) / train_scale).matrix();
  }

  Rng rng(seed);
  Trainer trainer(params, clf, target.cols());
  Network net = trainer.initial(data.d(), rng);

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  auto n_val = static_cast<Index>(std::floor(params.validation_fraction * static_cast<double>(n)));
  const bool early_stopping = n_val >= 2 && n - n_val >= 2;
  if (!early_stopping) n_val = 0;
  const std::vector<Index> val_rows(order.begin(), order.begin() + n_val);
  std::vector<Index> train_rows(order.begin() + n_val, order.end());
  const Matrix x_val = select_rows(data.features, val_rows);
  const Matrix y_val = select_rows(target, val_rows);

  AdamState adam;
  for (const auto& l : net.layers) {
    adam.mw.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    adam.vw.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    adam.mb.push_back(Vector::Zero(l.bias.size()));
    adam.vb.push_back(Vector::Zero(l.bias.size()));
  }

  Network best = net;
  double best_metric = early_stopping ? -std::numeric_limits<double>::infinity()
                                      : std::numeric_limits<double>::infinity();
  int stale = 0;
  const auto batch = static_cast<size_t>(params.batch_size);
  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    rng.shuffle(train_rows);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < train_rows.size(); start += batch) {
      const size_t stop = std::min(train_rows.size(), start + batch);
      const std::span<const Index> rows(train_rows.data() + start, stop - start);
      const double loss = trainer.step(net, adam, select_rows(data.features, rows), select_rows(target, rows));
      epoch_loss += loss * static_cast<double>(rows.size());
    }
    epoch_loss /= static_cast<double>(train_rows.size());
    if (early_stopping) {
      const double metric = trainer.score(net, x_val, y_val);
      if (metric > best_metric + params.tol) {
        best_metric = metric;
        best = net;
        stale = 0;
      } else if (++stale >= params.patience) {
        break;
      }
    } else {
      if (epoch_loss < best_metric - params.tol) {
        best_metric = epoch_loss;
        stale = 0;
      } else if (++stale >= params.patience) {
        break;
      }
      best = net;
    }
  }
  return std::make_unique<MlpModel>(data.task(), std::move(best), y_mean, y_scale);
}

std::unique_ptr<Model> restore_mlp(TaskKind task, int, const json& state) {
  Network net;
  for (const auto& l : state.at("layers")) {
    net.layers.push_back({matrix_from_json(l.at("weights")), vector_from_json(l.at("bias"))});
  }
  return std::make_unique<MlpModel>(task, std::move(net), state.at("y_mean").get<double>(),
                                    state.at("y_scale").get<double>());
}

}  // namespace softlearn::detail
