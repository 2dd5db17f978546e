#include "softlearn/bench.hpp"
#include "softlearn/datasets.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace softlearn;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<int> jobs;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "benchmark config (JSON)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--folds", o.folds, "outer folds");
  cmd->add_option("--jobs", o.jobs, "worker threads");
  cmd->add_option("--out", o.out, "output directory");
}

BenchConfig resolve(const Overrides& o) {
  BenchConfig c = o.config.empty() ? BenchConfig{} : load_bench_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.folds) c.folds = *o.folds;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.out) c.out_dir = *o.out;
  c.validate();
  return c;
}

int cmd_gen(const BenchConfig& c) {
  const fs::path dir = fs::path(c.out_dir) / "datasets";
  fs::create_directories(dir);
  for (const auto& entry : load_manifest(c.manifest)) {
    const Dataset data = materialize(entry);
    const auto path = dir / (data.name + ".csv");
    write_csv(data, path.string());
    std::cout << path.string() << " (" << data.n() << " x " << data.d() << ")\n";
  }
  return 0;
}

int cmd_run(const BenchConfig& c, bool verbose) {
  RunOptions options;
  options.verbose = verbose;
  const ResultStore store = run_benchmark(c, options);
  save_store(store, c.out_dir);
  const auto failed = store.failed_cells();
  for (const auto& f : failed) std::cerr << "failed: " << f << '\n';
  std::cout << store.results.size() << " cells written to " << c.out_dir << '\n';
  return failed.empty() ? 0 : 2;
}

int cmd_report(const BenchConfig& c, const std::string& report_dir) {
  const ResultStore store = load_store(c.out_dir);
  const std::string dir = report_dir.empty() ? (fs::path(c.out_dir) / "report").string() : report_dir;
  const auto summary = emit_report(store, dir);
  for (const auto& f : summary.files) std::cout << (fs::path(dir) / f).string() << '\n';
  for (const auto& m : summary.missing) std::cerr << "missing: " << m << '\n';
  return summary.missing.empty() ? 0 : 2;
}

int cmd_audit(const BenchConfig& c, bool verbose) {
  ResultStore clean;
  if (fs::exists(fs::path(c.out_dir) / "index.json")) {
    clean = load_store(c.out_dir);
  } else {
    RunOptions options;
    options.verbose = verbose;
    clean = run_benchmark(c, options);
  }
  const auto report = audit_benchmark(c, clean);
  for (const auto& m : report.messages) std::cerr << m << '\n';
  std::cout << "cells checked: " << report.cells_checked << '\n'
            << "vertex dominance violations: " << report.oracle_violations << '\n'
            << "initialization objective violations: " << report.init_objective_violations << '\n'
            << "initialization weight violations: " << report.init_weight_violations << '\n'
            << "leakage violations: " << report.leakage_violations << '\n'
            << (report.passed() ? "audit passed" : "audit FAILED") << '\n';
  return report.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft Learning benchmark driver"};
  app.require_subcommand(1);
  Overrides gen_o, run_o, report_o, audit_o;
  bool verbose = false;
  std::string report_dir;
  auto* gen = app.add_subcommand("gen", "write manifest datasets as CSV");
  add_common(gen, gen_o);
  auto* run = app.add_subcommand("run", "execute the benchmark");
  add_common(run, run_o);
  run->add_flag("-v,--verbose", verbose, "progress to stderr");
  auto* report = app.add_subcommand("report", "emit analysis tables from a result store");
  add_common(report, report_o);
  report->add_option("--report-dir", report_dir, "report directory (default <out>/report)");
  auto* audit = app.add_subcommand("audit", "vertex dominance, multi-start and leakage audits");
  add_common(audit, audit_o);
  audit->add_flag("-v,--verbose", verbose, "progress to stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(resolve(gen_o));
    if (*run) return cmd_run(resolve(run_o), verbose);
    if (*report) return cmd_report(resolve(report_o), report_dir);
    if (*audit) return cmd_audit(resolve(audit_o), verbose);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    const bool config = e.code() == ErrorCode::Config || e.code() == ErrorCode::Parse || e.code() == ErrorCode::Io;
    return config ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
