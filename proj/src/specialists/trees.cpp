#include "models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softlearn::detail {

namespace {

/// Flat binary tree. Internal nodes send x[feature] <= threshold left.
struct Tree {
  std::vector<int> feature;  // -1 marks a leaf
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  Matrix values;  // one row per node; only leaf rows are read

  Eigen::RowVectorXd evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int node = 0;
    while (feature[static_cast<size_t>(node)] >= 0) {
      const auto s = static_cast<size_t>(node);
      node = x(feature[s]) <= threshold[s] ? left[s] : right[s];
    }
    return values.row(node);
  }

  json state() const {
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
            {"values", matrix_to_json(values)}};
  }

  static Tree from_state(const json& j) {
    Tree t;
    t.feature = j.at("feature").get<std::vector<int>>();
    t.threshold = j.at("threshold").get<std::vector<double>>();
    t.left = j.at("left").get<std::vector<int>>();
    t.right = j.at("right").get<std::vector<int>>();
    t.values = matrix_from_json(j.at("values"));
    return t;
  }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // weighted child impurity, lower is better
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Dataset& data, int max_depth, int min_leaf, int max_features,
              bool extra, Rng* rng)
      : x_(x), task_(data.task()), n_classes_(data.labels.n_classes()), max_depth_(max_depth),
        min_leaf_(min_leaf), max_features_(max_features), extra_(extra), rng_(rng) {
    out_dim_ = task_ == TaskKind::Classification ? n_classes_ : 1;
    if (task_ == TaskKind::Classification) {
      const auto& y = data.labels.classes();
      response_.resize(static_cast<Index>(y.size()));
      for (size_t i = 0; i < y.size(); ++i) response_(static_cast<Index>(i)) = y[i];
    } else {
      response_ = data.labels.targets();
    }
  }

  Tree build(std::vector<Index> samples) {
    grow(samples, 0);
    tree_.values.resize(static_cast<Index>(leaf_values_.size()), out_dim_);
    for (size_t i = 0; i < leaf_values_.size(); ++i) tree_.values.row(static_cast<Index>(i)) = leaf_values_[i];
    return std::move(tree_);
  }

 private:
  int new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    leaf_values_.emplace_back(Eigen::RowVectorXd::Zero(out_dim_));
    return static_cast<int>(tree_.feature.size()) - 1;
  }

  double impurity(const std::vector<Index>& samples, Eigen::RowVectorXd& value) const {
    const double n = static_cast<double>(samples.size());
    value.setZero(out_dim_);
    if (task_ == TaskKind::Classification) {
      for (Index s : samples) value(static_cast<Index>(response_(s))) += 1.0;
      value /= n;
      return n * (1.0 - value.squaredNorm());
    }
    double sum = 0.0, sq = 0.0;
    for (Index s : samples) {
      sum += response_(s);
      sq += response_(s) * response_(s);
    }
    value(0) = sum / n;
    return std::max(0.0, sq - sum * sum / n);
  }

  std::vector<int> candidate_features() {
    std::vector<int> all(static_cast<size_t>(x_.cols()));
    std::iota(all.begin(), all.end(), 0);
    if (max_features_ <= 0 || max_features_ >= x_.cols() || rng_ == nullptr) return all;
    // Partial Fisher-Yates: the first max_features_ entries form the sample.
    for (int i = 0; i < max_features_; ++i) {
      const auto j = static_cast<size_t>(i) + static_cast<size_t>(rng_->below(all.size() - static_cast<size_t>(i)));
      std::swap(all[static_cast<size_t>(i)], all[j]);
    }
    all.resize(static_cast<size_t>(max_features_));
    std::sort(all.begin(), all.end());
    return all;
  }

  // Weighted child impurity for samples sorted by the feature, split after
  // position `cut` (exclusive).
  void best_exhaustive(std::vector<Index>& samples, int f, SplitChoice& best) const {
    std::sort(samples.begin(), samples.end(), [&](Index a, Index b) {
      const double xa = x_(a, f), xb = x_(b, f);
      return xa < xb || (xa == xb && a < b);
    });
    const Index n = static_cast<Index>(samples.size());
    if (x_(samples.front(), f) == x_(samples.back(), f)) return;
    if (task_ == TaskKind::Classification) {
      Eigen::VectorXd left = Eigen::VectorXd::Zero(n_classes_);
      Eigen::VectorXd total = Eigen::VectorXd::Zero(n_classes_);
      for (Index s : samples) total(static_cast<Index>(response_(s))) += 1.0;
      for (Index i = 0; i + 1 < n; ++i) {
        left(static_cast<Index>(response_(samples[static_cast<size_t>(i)]))) += 1.0;
        const Index nl = i + 1, nr = n - nl;
        if (nl < min_leaf_) continue;
        if (nr < min_leaf_) break;
        const double xa = x_(samples[static_cast<size_t>(i)], f);
        const double xb = x_(samples[static_cast<size_t>(i + 1)], f);
        if (xa == xb) continue;
        const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
        const double gl = dl - left.squaredNorm() / dl;
        const double gr = dr - (total - left).squaredNorm() / dr;
        consider(best, f, xa, xb, gl + gr);
      }
    } else {
      double total_sum = 0.0, total_sq = 0.0;
      for (Index s : samples) {
        total_sum += response_(s);
        total_sq += response_(s) * response_(s);
      }
      double ls = 0.0, lq = 0.0;
      for (Index i = 0; i + 1 < n; ++i) {
        const double y = response_(samples[static_cast<size_t>(i)]);
        ls += y;
        lq += y * y;
        const Index nl = i + 1, nr = n - nl;
        if (nl < min_leaf_) continue;
        if (nr < min_leaf_) break;
        const double xa = x_(samples[static_cast<size_t>(i)], f);
        const double xb = x_(samples[static_cast<size_t>(i + 1)], f);
        if (xa == xb) continue;
        const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
        const double rs = total_sum - ls, rq = total_sq - lq;
        const double sse = (lq - ls * ls / dl) + (rq - rs * rs / dr);
        consider(best, f, xa, xb, sse);
      }
    }
  }

  static void consider(SplitChoice& best, int f, double xa, double xb, double score) {
    if (best.feature >= 0 && !(score < best.score)) return;
    double mid = 0.5 * (xa + xb);
    if (!(mid < xb)) mid = xa;  // rounding pushed the midpoint onto xb
    best = {f, mid, score};
  }

  void best_random(const std::vector<Index>& samples, int f, SplitChoice& best) const {
    double lo = x_(samples.front(), f), hi = lo;
    for (Index s : samples) {
      lo = std::min(lo, x_(s, f));
      hi = std::max(hi, x_(s, f));
    }
    if (!(hi > lo)) return;
    double threshold = rng_->uniform(lo, hi);
    if (threshold >= hi) threshold = lo;
    std::vector<Index> left, right;
    for (Index s : samples) (x_(s, f) <= threshold ? left : right).push_back(s);
    if (static_cast<Index>(left.size()) < min_leaf_ || static_cast<Index>(right.size()) < min_leaf_) return;
    Eigen::RowVectorXd scratch;
    const double score = impurity(left, scratch) + impurity(right, scratch);
    if (best.feature < 0 || score < best.score) best = {f, threshold, score};
  }

  int grow(std::vector<Index>& samples, int depth) {
    const int node = new_node();
    Eigen::RowVectorXd value;
    const double parent = impurity(samples, value);
    leaf_values_[static_cast<size_t>(node)] = value;
    const Index n = static_cast<Index>(samples.size());
    if ((max_depth_ > 0 && depth >= max_depth_) || n < 2 * static_cast<Index>(min_leaf_) ||
        parent <= 1e-12 * static_cast<double>(n)) {
      return node;
    }
    SplitChoice best;
    for (int f : candidate_features()) {
      if (extra_) {
        best_random(samples, f, best);
      } else {
        best_exhaustive(samples, f, best);
      }
    }
    if (best.feature < 0 || !(best.score < parent - 1e-12 * std::max(1.0, parent))) return node;
    std::vector<Index> left, right;
    for (Index s : samples) (x_(s, best.feature) <= best.threshold ? left : right).push_back(s);
    if (left.empty() || right.empty()) return node;
    std::vector<Index>().swap(samples);
    tree_.feature[static_cast<size_t>(node)] = best.feature;
    tree_.threshold[static_cast<size_t>(node)] = best.threshold;
    const int l = grow(left, depth + 1);
    tree_.left[static_cast<size_t>(node)] = l;
    const int r = grow(right, depth + 1);
    tree_.right[static_cast<size_t>(node)] = r;
    return node;
  }

  const Matrix& x_;
  TaskKind task_;
  int n_classes_;
  Index out_dim_ = 1;
  int max_depth_;
  int min_leaf_;
  int max_features_;
  bool extra_;
  Rng* rng_;
  Vector response_;
  Tree tree_;
  std::vector<Eigen::RowVectorXd> leaf_values_;
};

class TreeEnsembleModel final : public Model {
 public:
  explicit TreeEnsembleModel(std::vector<Tree> trees) : trees_(std::move(trees)) {}

  Matrix predict(const Matrix& x) const override {
    Matrix out = Matrix::Zero(x.rows(), trees_.front().values.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      for (const auto& t : trees_) out.row(i) += t.evaluate(x.row(i));
    }
    out /= static_cast<double>(trees_.size());
    return out;
  }

  json state() const override {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(t.state());
    return {{"trees", std::move(trees)}};
  }

 private:
  std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<Model> train_tree(const TreeParams& params, const Dataset& data, std::uint64_t) {
  std::vector<Index> all(static_cast<size_t>(data.n()));
  std::iota(all.begin(), all.end(), Index{0});
  TreeBuilder builder(data.features, data, params.max_depth, params.min_samples_leaf, 0, false, nullptr);
  std::vector<Tree> trees;
  trees.push_back(builder.build(std::move(all)));
  return std::make_unique<TreeEnsembleModel>(std::move(trees));
}

std::unique_ptr<Model> train_forest(const ForestParams& params, const Dataset& data, std::uint64_t seed) {
  const Index n = data.n();
  const int max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(data.d()))));
  std::vector<Tree> trees;
  trees.reserve(static_cast<size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<Index> samples(static_cast<size_t>(n));
    if (params.extra_trees) {
      std::iota(samples.begin(), samples.end(), Index{0});
    } else {
      for (auto& s : samples) s = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    TreeBuilder builder(data.features, data, params.max_depth, params.min_samples_leaf, max_features,
                        params.extra_trees, &rng);
    trees.push_back(builder.build(std::move(samples)));
  }
  return std::make_unique<TreeEnsembleModel>(std::move(trees));
}

std::unique_ptr<Model> restore_trees(TaskKind, int, const json& state) {
  std::vector<Tree> trees;
  for (const auto& t : state.at("trees")) trees.push_back(Tree::from_state(t));
  if (trees.empty()) throw Error(ErrorCode::Parse, "tree ensemble state without trees");
  return std::make_unique<TreeEnsembleModel>(std::move(trees));
}

}  // namespace softlearn::detail
