#pragma once

#include "softlearn/core.hpp"
#include "softlearn/specialists.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace softlearn {

struct FoldAssignment {
  int n_folds = 0;
  std::vector<int> fold_of;  // one entry per sample, in 0..n_folds-1
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  Index size() const { return static_cast<Index>(fold_of.size()); }
  std::vector<Index> test_rows(int fold) const;
  std::vector<Index> train_rows(int fold) const;
  std::vector<Index> fold_sizes() const;
};

/// Shuffles each class, concatenates the classes and deals samples to folds
/// round-robin, so per-fold class counts are within one of the proportional
/// share. Classes smaller than V are dealt the same way with a warning.
FoldAssignment stratified_kfold(const LabelVector& labels, int n_folds, std::uint64_t seed);

/// Random permutation cut into contiguous blocks; the first n mod V folds
/// hold one extra sample.
FoldAssignment kfold(Index n, int n_folds, std::uint64_t seed);

/// Stratified for classification, plain k-fold for regression.
FoldAssignment make_folds(const LabelVector& labels, int n_folds, std::uint64_t seed);

/// Inner fold count: 5 when n <= 2000, 3 otherwise.
int default_fold_count(Index n);

/// n x K x C out-of-fold predictions, stored as one n x C slice per specialist.
struct OofPredictionTensor {
  Index n = 0;
  Index K = 0;
  Index C = 0;
  std::vector<Matrix> slices;
  std::vector<std::vector<std::uint8_t>> covered;  // [k][i], 1 once written
  std::vector<Standardizer> fold_scalers;
  /// Per (k, fold) digest of the fitted model state, filled when requested.
  std::vector<std::vector<std::uint64_t>> state_digests;

  double operator()(Index i, Index k, Index c) const { return slices[static_cast<size_t>(k)](i, c); }
  bool complete() const;
};

struct OofOptions {
  int jobs = 1;
  bool record_digests = false;
};

/// Phase 1: for every fold v and specialist k, fits specialist k on the
/// standardized complement of fold v (seed derive_seed(master, k, v)) and
/// writes its predictions for the rows of fold v. External specialists are
/// filled from their recorded predictions.
OofPredictionTensor assemble_oof(const SpecialistLibrary& library, const Dataset& data,
                                 const FoldAssignment& folds, std::uint64_t master_seed,
                                 const OofOptions& options = {});

/// FNV-1a over the serialized model state.
std::uint64_t state_digest(const TrainedSpecialist& model);

}  // namespace softlearn
