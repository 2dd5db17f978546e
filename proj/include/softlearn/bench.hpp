#pragma once

#include "softlearn/core.hpp"
#include "softlearn/datasets.hpp"
#include "softlearn/ensemble.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace softlearn {

inline constexpr const char* kSoftLearning = "soft_learning";
inline constexpr const char* kBestOf3 = "best_of_3";
/// Roster token expanding to every specialist of the dataset's default library.
inline constexpr const char* kAllSpecialists = "specialists";

struct BenchConfig {
  std::string manifest = "manifests/desk.json";
  std::vector<std::string> methods{kSoftLearning, kAllSpecialists, kBestOf3};
  int folds = 5;
  std::uint64_t seed = 42;
  int inner_folds = 0;  // 0 applies the n-based rule
  std::string out_dir = "results";
  int jobs = 1;

  void validate() const;
};

BenchConfig bench_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
BenchConfig load_bench_config(const std::string& path);
nlohmann::json to_json(const BenchConfig& config);

/// Soft Learning diagnostics for one outer fold.
struct SoftFold {
  Vector weights;
  double objective = 0.0;
  double min_vertex_objective = 0.0;
  double init_objective_spread = 0.0;  // max - min over starts
  double weight_linf_spread = 0.0;     // max over starts of ||w_start - w||_inf
  bool full_rank = true;
  bool converged = true;
  double kkt_residual = 0.0;
  double min_singular_value = 0.0;
  // Test-fold diagnostics.
  double mean_error = 0.0;
  double ambiguity = 0.0;
  double ensemble_error = 0.0;
  double mean_disagreement = 0.0;
  Index n_correct = 0;
  Index n_incorrect = 0;
  double sum_v_correct = 0.0;
  double sum_v_incorrect = 0.0;
  std::vector<SelectivePoint> selective;
  std::vector<double> specialist_scores;  // test score of every refit specialist
};

struct RunResult {
  std::string dataset;
  std::string method;
  TaskKind task = TaskKind::Classification;
  std::vector<double> fold_scores;
  double mean = 0.0;
  double sd = 0.0;
  double seconds = 0.0;  // wall clock; persisted apart from the result files
  std::string error;     // non-empty when the cell failed
  std::vector<std::string> members;  // best-of-3 members
  std::string chosen;                // best-of-3 winner
  std::vector<std::string> specialist_ids;
  std::vector<std::string> specialist_families;
  std::vector<bool> piecewise_constant;
  std::vector<SoftFold> soft;
  std::vector<std::string> digests;  // per fold, hex digest of every trained model state

  bool ok() const { return error.empty(); }
  double mean_v_correct() const;
  double mean_v_incorrect() const;
};

nlohmann::json to_json(const RunResult& r);
RunResult run_result_from_json(const nlohmann::json& j);

struct DatasetInfo {
  std::string name;
  TaskKind task = TaskKind::Classification;
  Index n = 0;
  Index d = 0;
  int n_classes = 1;
};

struct ResultStore {
  int format_version = 1;
  std::uint64_t seed = 42;
  int folds = 5;
  std::vector<DatasetInfo> datasets;  // manifest order
  std::vector<std::string> methods;   // roster order after expansion
  std::map<std::pair<std::string, std::string>, RunResult> results;

  void add(RunResult r);
  const RunResult* find(const std::string& dataset, const std::string& method) const;
  std::vector<std::string> failed_cells() const;
};

/// One file per (dataset, method), index.json, and timings.json.
void save_store(const ResultStore& store, const std::string& dir);
ResultStore load_store(const std::string& dir);

struct RunOptions {
  /// Audit mode: test-fold labels are overwritten after the split.
  bool corrupt_test_labels = false;
  /// Progress lines to stderr.
  bool verbose = false;
};

/// Outer k-fold evaluation of every roster method on every manifest dataset.
ResultStore run_benchmark(const BenchConfig& config, const RunOptions& options = {});
/// Same, on datasets already in memory.
ResultStore run_benchmark(const BenchConfig& config, const std::vector<Dataset>& datasets,
                          const RunOptions& options = {});

/// Best-of-3 members for a task: logistic/ridge, random forest, gradient boosting.
std::vector<std::string> best_of_3_members(TaskKind task);

/// Size bucket label: small (n < 500), medium (500..5000), large (> 5000).
std::string size_bucket(Index n);
/// Mean score rounded to 1e-9 so that fold-order rounding noise cannot split ties.
double ranking_score(double mean);

struct ReportSummary {
  std::vector<std::string> files;
  std::vector<std::string> missing;
};

/// Writes the analysis CSVs into out_dir.
ReportSummary emit_report(const ResultStore& store, const std::string& out_dir);

struct AuditReport {
  Index cells_checked = 0;
  Index oracle_violations = 0;       // objective above the best vertex
  Index init_objective_violations = 0;
  Index init_weight_violations = 0;  // full-rank solves only
  Index leakage_violations = 0;
  bool leakage_checked = false;
  std::vector<std::string> messages;

  bool passed() const {
    return oracle_violations == 0 && init_objective_violations == 0 && init_weight_violations == 0 &&
           leakage_violations == 0;
  }
};

/// Oracle and multi-start checks on stored Soft Learning cells.
AuditReport audit_store(const ResultStore& store);
/// Also reruns the benchmark with corrupted test labels and compares model digests.
AuditReport audit_benchmark(const BenchConfig& config, const ResultStore& clean);
AuditReport audit_benchmark(const BenchConfig& config, const std::vector<Dataset>& datasets,
                            const ResultStore& clean);

}  // namespace softlearn
