#include "softlearn/bench.hpp"

#include <cstdio>

namespace softlearn {

namespace {

constexpr double kInitObjectiveTol = 1e-10;
constexpr double kInitWeightTol = 1e-6;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

}  // namespace

AuditReport audit_store(const ResultStore& store) {
  AuditReport report;
  for (const auto& [key, r] : store.results) {
    if (r.method != kSoftLearning || !r.ok()) continue;
    ++report.cells_checked;
    for (size_t v = 0; v < r.soft.size(); ++v) {
      const auto& f = r.soft[v];
      const std::string where = key.first + " fold " + std::to_string(v) + ": ";
      if (!(f.objective <= f.min_vertex_objective)) {
        ++report.oracle_violations;
        report.messages.push_back(where + "objective " + fmt(f.objective) + " above best vertex " +
                                  fmt(f.min_vertex_objective));
      }
      if (!(f.init_objective_spread <= kInitObjectiveTol)) {
        ++report.init_objective_violations;
        report.messages.push_back(where + "initializations disagree in objective by " + fmt(f.init_objective_spread));
      }
      if (f.full_rank && !(f.weight_linf_spread <= kInitWeightTol)) {
        ++report.init_weight_violations;
        report.messages.push_back(where + "full-rank initializations disagree in weights by " +
                                  fmt(f.weight_linf_spread));
      }
    }
  }
  return report;
}

namespace {

void compare_digests(const ResultStore& clean, const ResultStore& corrupted, AuditReport& report) {
  report.leakage_checked = true;
  for (const auto& [key, r] : clean.results) {
    if (!r.ok()) continue;
    const auto* other = corrupted.find(key.first, key.second);
    if (!other) {
      ++report.leakage_violations;
      report.messages.push_back(key.first + "/" + key.second + ": missing from corrupted run");
      continue;
    }
    for (size_t v = 0; v < r.digests.size(); ++v) {
      if (v >= other->digests.size() || other->digests[v] != r.digests[v]) {
        ++report.leakage_violations;
        report.messages.push_back(key.first + "/" + key.second + " fold " + std::to_string(v) +
                                  ": model state changed when test labels were corrupted");
      }
    }
  }
}

}  // namespace

AuditReport audit_benchmark(const BenchConfig& config, const ResultStore& clean) {
  AuditReport report = audit_store(clean);
  RunOptions options;
  options.corrupt_test_labels = true;
  compare_digests(clean, run_benchmark(config, options), report);
  return report;
}

AuditReport audit_benchmark(const BenchConfig& config, const std::vector<Dataset>& datasets, const ResultStore& clean) {
  AuditReport report = audit_store(clean);
  RunOptions options;
  options.corrupt_test_labels = true;
  compare_digests(clean, run_benchmark(config, datasets, options), report);
  return report;
}

}  // namespace softlearn
