#include "softlearn/cvengine.hpp"

#include "softlearn/parallel.hpp"
#include "softlearn/rng.hpp"

#include <numeric>

namespace softlearn {

std::vector<Index> FoldAssignment::test_rows(int fold) const {
  std::vector<Index> rows;
  for (size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

std::vector<Index> FoldAssignment::train_rows(int fold) const {
  std::vector<Index> rows;
  for (size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

std::vector<Index> FoldAssignment::fold_sizes() const {
  std::vector<Index> sizes(static_cast<size_t>(n_folds), 0);
  for (int f : fold_of) ++sizes[static_cast<size_t>(f)];
  return sizes;
}

namespace {

void check_fold_request(Index n, int n_folds) {
  if (n_folds < 2) throw Error(ErrorCode::Config, "fold count must be at least 2");
  if (n < n_folds) {
    throw Error(ErrorCode::Config, "cannot split " + std::to_string(n) + " samples into " +
                                       std::to_string(n_folds) + " non-empty folds");
  }
}

}  // namespace

FoldAssignment stratified_kfold(const LabelVector& labels, int n_folds, std::uint64_t seed) {
  const auto& y = labels.classes();
  const Index n = labels.size();
  check_fold_request(n, n_folds);
  FoldAssignment out;
  out.n_folds = n_folds;
  out.seed = seed;
  out.fold_of.assign(static_cast<size_t>(n), 0);

  Rng rng(seed);
  std::vector<std::vector<Index>> members(static_cast<size_t>(labels.n_classes()));
  for (Index i = 0; i < n; ++i) members[static_cast<size_t>(y[static_cast<size_t>(i)])].push_back(i);
  size_t position = 0;
  for (size_t c = 0; c < members.size(); ++c) {
    auto& rows = members[c];
    if (!rows.empty() && static_cast<int>(rows.size()) < n_folds) {
      out.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                             " samples, fewer than " + std::to_string(n_folds) + " folds");
    }
    rng.shuffle(rows);
    for (Index i : rows) out.fold_of[static_cast<size_t>(i)] = static_cast<int>(position++ % static_cast<size_t>(n_folds));
  }
  return out;
}

FoldAssignment kfold(Index n, int n_folds, std::uint64_t seed) {
  check_fold_request(n, n_folds);
  FoldAssignment out;
  out.n_folds = n_folds;
  out.seed = seed;
  out.fold_of.assign(static_cast<size_t>(n), 0);
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);
  const Index base = n / n_folds;
  const Index extra = n % n_folds;
  size_t pos = 0;
  for (int v = 0; v < n_folds; ++v) {
    const Index size = base + (v < extra ? 1 : 0);
    for (Index j = 0; j < size; ++j) out.fold_of[static_cast<size_t>(order[pos++])] = v;
  }
  return out;
}

FoldAssignment make_folds(const LabelVector& labels, int n_folds, std::uint64_t seed) {
  return labels.task() == TaskKind::Classification ? stratified_kfold(labels, n_folds, seed)
                                                   : kfold(labels.size(), n_folds, seed);
}

int default_fold_count(Index n) { return n <= 2000 ? 5 : 3; }

bool OofPredictionTensor::complete() const {
  for (const auto& mask : covered) {
    for (auto c : mask) {
      if (c == 0) return false;
    }
  }
  return covered.size() == static_cast<size_t>(K);
}

std::uint64_t state_digest(const TrainedSpecialist& model) {
  const std::string bytes = model.state().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void fill_external(const ExternalPredictions& source, const std::vector<Index>& test, int fold,
                   Matrix& slice, std::vector<std::uint8_t>& covered) {
  const auto it = source.folds.find(fold);
  if (it == source.folds.end()) {
    throw Error(ErrorCode::Coverage, "no external predictions for fold " + std::to_string(fold));
  }
  const auto& rec = it->second;
  if (rec.predictions.rows() != static_cast<Index>(rec.rows.size()) || rec.predictions.cols() != slice.cols()) {
    throw Error(ErrorCode::Dimension, "external predictions for fold " + std::to_string(fold) +
                                          " have the wrong shape");
  }
  std::vector<bool> in_fold(covered.size(), false);
  for (Index i : test) in_fold[static_cast<size_t>(i)] = true;
  for (size_t r = 0; r < rec.rows.size(); ++r) {
    const Index i = rec.rows[r];
    if (i < 0 || i >= slice.rows() || !in_fold[static_cast<size_t>(i)]) {
      throw Error(ErrorCode::Coverage, "external prediction row " + std::to_string(i) +
                                           " is not in fold " + std::to_string(fold));
    }
    slice.row(i) = rec.predictions.row(static_cast<Index>(r));
    covered[static_cast<size_t>(i)] = 1;
  }
  for (Index i : test) {
    if (!covered[static_cast<size_t>(i)]) {
      throw Error(ErrorCode::Coverage, "external predictions miss row " + std::to_string(i) +
                                           " of fold " + std::to_string(fold));
    }
  }
}

}  // namespace

OofPredictionTensor assemble_oof(const SpecialistLibrary& library, const Dataset& data,
                                 const FoldAssignment& folds, std::uint64_t master_seed,
                                 const OofOptions& options) {
  if (folds.size() != data.n()) {
    throw Error(ErrorCode::Dimension, "fold assignment covers " + std::to_string(folds.size()) +
                                          " samples, dataset has " + std::to_string(data.n()));
  }
  if (library.size() < 1) throw Error(ErrorCode::Config, "empty specialist library");
  const int n_folds = folds.n_folds;
  const auto K = static_cast<size_t>(library.size());

  OofPredictionTensor out;
  out.n = data.n();
  out.K = library.size();
  out.C = data.task() == TaskKind::Classification ? data.labels.n_classes() : 1;
  out.slices.assign(K, Matrix::Zero(out.n, out.C));
  out.covered.assign(K, std::vector<std::uint8_t>(static_cast<size_t>(out.n), 0));
  if (options.record_digests) {
    out.state_digests.assign(K, std::vector<std::uint64_t>(static_cast<size_t>(n_folds), 0));
  }

  std::vector<std::vector<Index>> test(static_cast<size_t>(n_folds));
  std::vector<Dataset> train(static_cast<size_t>(n_folds));
  std::vector<Matrix> test_x(static_cast<size_t>(n_folds));
  for (int v = 0; v < n_folds; ++v) {
    const auto sv = static_cast<size_t>(v);
    test[sv] = folds.test_rows(v);
    const auto rows = folds.train_rows(v);
    if (test[sv].empty() || rows.empty()) {
      throw Error(ErrorCode::Config, "fold " + std::to_string(v) + " is empty or covers every sample");
    }
    train[sv] = data.subset(rows);
    out.fold_scalers.push_back(fit_standardizer(train[sv].features));
    train[sv].features = apply_standardizer(out.fold_scalers.back(), train[sv].features);
    test_x[sv] = apply_standardizer(out.fold_scalers.back(), select_rows(data.features, test[sv]));
  }

  parallel_for(K * static_cast<size_t>(n_folds), options.jobs, [&](size_t task) {
    const size_t k = task / static_cast<size_t>(n_folds);
    const int v = static_cast<int>(task % static_cast<size_t>(n_folds));
    const auto sv = static_cast<size_t>(v);
    const auto& config = library.specialists[k];
    try {
      if (const auto* ext = std::get_if<ExternalParams>(&config.params)) {
        if (!ext->source) throw Error(ErrorCode::Config, "external specialist without predictions");
        fill_external(*ext->source, test[sv], v, out.slices[k], out.covered[k]);
        return;
      }
      const auto model = fit(config, train[sv], derive_seed(master_seed, k, sv));
      const Matrix pred = model.predict_matrix(test_x[sv]);
      for (size_t r = 0; r < test[sv].size(); ++r) {
        out.slices[k].row(test[sv][r]) = pred.row(static_cast<Index>(r));
        out.covered[k][static_cast<size_t>(test[sv][r])] = 1;
      }
      if (options.record_digests) out.state_digests[k][sv] = state_digest(model);
    } catch (const Error& e) {
      throw Error(e.code(), "specialist '" + config.id + "' (index " + std::to_string(k) + "), fold " +
                                std::to_string(v) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::Numeric, "specialist '" + config.id + "' (index " + std::to_string(k) +
                                          "), fold " + std::to_string(v) + ": " + e.what());
    }
  });
  if (!out.complete()) throw Error(ErrorCode::Coverage, "out-of-fold tensor is incomplete");
  return out;
}

}  // namespace softlearn
