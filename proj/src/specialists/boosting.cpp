#include "models.hpp"

#include <algorithm>
#include <cmath>

namespace softlearn::detail {

namespace {

constexpr double kMinChildHessian = 1e-3;

struct ScoreTree {
  std::vector<int> feature;  // -1 marks a leaf
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  double evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    size_t node = 0;
    while (feature[node] >= 0) {
      node = static_cast<size_t>(x(feature[node]) <= threshold[node] ? left[node] : right[node]);
    }
    return value[node];
  }
};

/// Bin edges at equally spaced quantiles of each feature. A value x falls in
/// bin b when edges[b-1] < x <= edges[b].
std::vector<std::vector<double>> quantile_edges(const Matrix& x, int max_bins) {
  std::vector<std::vector<double>> edges(static_cast<size_t>(x.cols()));
  std::vector<double> col(static_cast<size_t>(x.rows()));
  for (Index f = 0; f < x.cols(); ++f) {
    for (Index i = 0; i < x.rows(); ++i) col[static_cast<size_t>(i)] = x(i, f);
    std::sort(col.begin(), col.end());
    std::vector<double> distinct = col;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto& e = edges[static_cast<size_t>(f)];
    if (static_cast<int>(distinct.size()) <= max_bins) {
      for (size_t i = 0; i + 1 < distinct.size(); ++i) e.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    } else {
      const double last = static_cast<double>(col.size() - 1);
      for (int b = 1; b < max_bins; ++b) {
        const double pos = last * b / max_bins;
        const auto lo = static_cast<size_t>(std::floor(pos));
        const size_t hi = std::min(lo + 1, col.size() - 1);
        const double q = col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
        if (q < col.back() && (e.empty() || q > e.back())) e.push_back(q);
      }
    }
  }
  return edges;
}

class ScoreTreeBuilder {
 public:
  ScoreTreeBuilder(const std::vector<std::vector<std::uint8_t>>& bins,
                   const std::vector<std::vector<double>>& edges, const BoostingParams& params)
      : bins_(bins), edges_(edges), params_(params) {}

  ScoreTree build(const Vector& grad, const Vector& hess, std::vector<Index> samples) {
    grad_ = &grad;
    hess_ = &hess;
    tree_ = ScoreTree{};
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  double leaf_weight(double g, double h) const { return -g / (h + params_.l2 + 1e-12); }
  double gain_term(double g, double h) const { return g * g / (h + params_.l2 + 1e-12); }

  int grow(std::vector<Index>& samples, int depth) {
    const auto node = static_cast<int>(tree_.feature.size());
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    double g = 0.0, h = 0.0;
    for (Index s : samples) {
      g += (*grad_)(s);
      h += (*hess_)(s);
    }
    tree_.value.push_back(params_.learning_rate * leaf_weight(g, h));
    const auto n = static_cast<Index>(samples.size());
    if (depth >= params_.max_depth || n < 2 * params_.min_samples_leaf) return node;

    const double parent = gain_term(g, h);
    int best_f = -1, best_bin = -1;
    double best_gain = 1e-12 * std::max(1.0, parent);
    std::vector<double> hg, hh;
    std::vector<Index> hc;
    for (size_t f = 0; f < edges_.size(); ++f) {
      const size_t n_bins = edges_[f].size() + 1;
      if (n_bins < 2) continue;
      hg.assign(n_bins, 0.0);
      hh.assign(n_bins, 0.0);
      hc.assign(n_bins, 0);
      const auto& col = bins_[f];
      for (Index s : samples) {
        const size_t b = col[static_cast<size_t>(s)];
        hg[b] += (*grad_)(s);
        hh[b] += (*hess_)(s);
        ++hc[b];
      }
      double lg = 0.0, lh = 0.0;
      Index lc = 0;
      for (size_t b = 0; b + 1 < n_bins; ++b) {
        lg += hg[b];
        lh += hh[b];
        lc += hc[b];
        if (lc < params_.min_samples_leaf) continue;
        if (n - lc < params_.min_samples_leaf) break;
        if (hc[b] == 0) continue;  // same partition as the previous edge
        const double rh = h - lh;
        if (lh < kMinChildHessian || rh < kMinChildHessian) continue;
        const double gain = gain_term(lg, lh) + gain_term(g - lg, rh) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_bin = static_cast<int>(b);
        }
      }
    }
    if (best_f < 0) return node;
    std::vector<Index> left, right;
    const auto& col = bins_[static_cast<size_t>(best_f)];
    for (Index s : samples) (col[static_cast<size_t>(s)] <= best_bin ? left : right).push_back(s);
    std::vector<Index>().swap(samples);
    tree_.feature[static_cast<size_t>(node)] = best_f;
    tree_.threshold[static_cast<size_t>(node)] = edges_[static_cast<size_t>(best_f)][static_cast<size_t>(best_bin)];
    const int l = grow(left, depth + 1);
    tree_.left[static_cast<size_t>(node)] = l;
    const int r = grow(right, depth + 1);
    tree_.right[static_cast<size_t>(node)] = r;
    return node;
  }

  const std::vector<std::vector<std::uint8_t>>& bins_;
  const std::vector<std::vector<double>>& edges_;
  const BoostingParams& params_;
  const Vector* grad_ = nullptr;
  const Vector* hess_ = nullptr;
  ScoreTree tree_;
};

void softmax_rows(Matrix& scores) {
  for (Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - m).exp().matrix();
    scores.row(i) /= scores.row(i).sum();
  }
}

class BoostingModel final : public Model {
 public:
  BoostingModel(TaskKind task, Vector init, std::vector<std::vector<ScoreTree>> rounds)
      : task_(task), init_(std::move(init)), rounds_(std::move(rounds)) {}

  Matrix predict(const Matrix& x) const override {
    Matrix scores = init_.transpose().replicate(x.rows(), 1);
    for (Index i = 0; i < x.rows(); ++i) {
      for (const auto& round : rounds_) {
        for (size_t c = 0; c < round.size(); ++c) scores(i, static_cast<Index>(c)) += round[c].evaluate(x.row(i));
      }
    }
    if (task_ == TaskKind::Classification) softmax_rows(scores);
    return scores;
  }

  json state() const override {
    json rounds = json::array();
    for (const auto& round : rounds_) {
      json trees = json::array();
      for (const auto& t : round) {
        trees.push_back({{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left},
                         {"right", t.right}, {"value", t.value}});
      }
      rounds.push_back(std::move(trees));
    }
    return {{"init", vector_to_json(init_)}, {"rounds", std::move(rounds)}};
  }

 private:
  TaskKind task_;
  Vector init_;
  std::vector<std::vector<ScoreTree>> rounds_;
};

}  // namespace

std::unique_ptr<Model> train_boosting(const BoostingParams& params, const Dataset& data) {
  const Index n = data.n();
  const bool clf = data.task() == TaskKind::Classification;
  const Index outputs = clf ? data.labels.n_classes() : 1;

  const auto edges = quantile_edges(data.features, params.max_bins);
  std::vector<std::vector<std::uint8_t>> bins(edges.size());
  for (size_t f = 0; f < edges.size(); ++f) {
    bins[f].resize(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const double v = data.features(i, static_cast<Index>(f));
      bins[f][static_cast<size_t>(i)] =
          static_cast<std::uint8_t>(std::lower_bound(edges[f].begin(), edges[f].end(), v) - edges[f].begin());
    }
  }

  Matrix targets;
  Vector init(outputs);
  if (clf) {
    targets = one_hot(data.labels);
    for (Index c = 0; c < outputs; ++c) init(c) = std::log(std::max(targets.col(c).mean(), 1e-12));
  } else {
    targets = data.labels.targets();
    init(0) = targets.col(0).mean();
  }

  Matrix scores = init.transpose().replicate(n, 1);
  std::vector<Index> all(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
  ScoreTreeBuilder builder(bins, edges, params);
  std::vector<std::vector<ScoreTree>> rounds;
  Vector grad(n), hess(n);
  for (int r = 0; r < params.rounds; ++r) {
    Matrix prob = scores;
    if (clf) softmax_rows(prob);
    std::vector<ScoreTree> round;
    for (Index c = 0; c < outputs; ++c) {
      if (clf) {
        grad = prob.col(c) - targets.col(c);
        hess = (prob.col(c).array() * (1.0 - prob.col(c).array())).matrix();
      } else {
        grad = scores.col(0) - targets.col(0);
        hess.setOnes();
      }
      round.push_back(builder.build(grad, hess, all));
    }
    for (Index i = 0; i < n; ++i) {
      for (Index c = 0; c < outputs; ++c) scores(i, c) += round[static_cast<size_t>(c)].evaluate(data.features.row(i));
    }
    rounds.push_back(std::move(round));
  }
  return std::make_unique<BoostingModel>(data.task(), std::move(init), std::move(rounds));
}

std::unique_ptr<Model> restore_boosting(TaskKind task, int, const json& state) {
  std::vector<std::vector<ScoreTree>> rounds;
  for (const auto& round_json : state.at("rounds")) {
    std::vector<ScoreTree> round;
    for (const auto& t : round_json) {
      ScoreTree tree;
      tree.feature = t.at("feature").get<std::vector<int>>();
      tree.threshold = t.at("threshold").get<std::vector<double>>();
      tree.left = t.at("left").get<std::vector<int>>();
      tree.right = t.at("right").get<std::vector<int>>();
      tree.value = t.at("value").get<std::vector<double>>();
      round.push_back(std::move(tree));
    }
    rounds.push_back(std::move(round));
  }
  return std::make_unique<BoostingModel>(task, vector_from_json(state.at("init")), std::move(rounds));
}

}  // namespace softlearn::detail
