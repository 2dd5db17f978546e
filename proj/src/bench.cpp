#include "softlearn/bench.hpp"

#include "softlearn/parallel.hpp"
#include "softlearn/rng.hpp"
#include "softlearn/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace softlearn {

using nlohmann::json;
namespace fs = std::filesystem;

// --- configuration -------------------------------------------------------------

void BenchConfig::validate() const {
  if (methods.empty()) throw Error(ErrorCode::Config, "method roster is empty");
  if (folds < 2) throw Error(ErrorCode::Config, "outer folds must be at least 2");
  if (inner_folds != 0 && inner_folds < 2) throw Error(ErrorCode::Config, "inner folds must be 0 (automatic) or at least 2");
  if (jobs < 1) throw Error(ErrorCode::Config, "jobs must be at least 1");
  std::set<std::string> known{kSoftLearning, kBestOf3, kAllSpecialists};
  for (auto task : {TaskKind::Classification, TaskKind::Regression}) {
    for (const auto& s : default_library(task).specialists) known.insert(s.id);
  }
  std::set<std::string> seen;
  for (const auto& m : methods) {
    if (!known.count(m)) throw Error(ErrorCode::Config, "unknown method '" + m + "'");
    if (!seen.insert(m).second) throw Error(ErrorCode::Config, "duplicate method '" + m + "'");
  }
}

BenchConfig bench_config_from_json(const json& j, const std::string& base_dir) {
  BenchConfig c;
  try {
    if (j.contains("manifest")) {
      fs::path p = j.at("manifest").get<std::string>();
      if (p.is_relative()) p = fs::path(base_dir) / p;
      c.manifest = p.lexically_normal().string();
    }
    c.methods = j.value("methods", c.methods);
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    c.inner_folds = j.value("inner_folds", c.inner_folds);
    c.out_dir = j.value("out", c.out_dir);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("bench config: ") + e.what());
  }
  c.validate();
  return c;
}

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "config '" + path + "': " + e.what());
  }
  return bench_config_from_json(j, fs::path(path).parent_path().string());
}

json to_json(const BenchConfig& c) {
  return {{"manifest", c.manifest}, {"methods", c.methods}, {"folds", c.folds}, {"seed", c.seed},
          {"inner_folds", c.inner_folds}, {"out", c.out_dir}, {"jobs", c.jobs}};
}

// --- results -------------------------------------------------------------------

double RunResult::mean_v_correct() const {
  double sum = 0.0;
  Index count = 0;
  for (const auto& f : soft) {
    sum += f.sum_v_correct;
    count += f.n_correct;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double RunResult::mean_v_incorrect() const {
  double sum = 0.0;
  Index count = 0;
  for (const auto& f : soft) {
    sum += f.sum_v_incorrect;
    count += f.n_incorrect;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

namespace {

json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json to_json(const SoftFold& f) {
  json selective = json::array();
  for (const auto& p : f.selective) {
    selective.push_back({{"quantile", p.quantile}, {"threshold", p.threshold}, {"coverage", p.coverage},
                         {"accuracy", p.accuracy}});
  }
  return {{"weights", vec(f.weights)},
          {"objective", f.objective},
          {"min_vertex_objective", f.min_vertex_objective},
          {"init_objective_spread", f.init_objective_spread},
          {"weight_linf_spread", f.weight_linf_spread},
          {"full_rank", f.full_rank},
          {"converged", f.converged},
          {"kkt_residual", f.kkt_residual},
          {"min_singular_value", f.min_singular_value},
          {"mean_error", f.mean_error},
          {"ambiguity", f.ambiguity},
          {"ensemble_error", f.ensemble_error},
          {"mean_disagreement", f.mean_disagreement},
          {"n_correct", f.n_correct},
          {"n_incorrect", f.n_incorrect},
          {"sum_v_correct", f.sum_v_correct},
          {"sum_v_incorrect", f.sum_v_incorrect},
          {"selective", std::move(selective)},
          {"specialist_scores", f.specialist_scores}};
}

SoftFold soft_fold_from_json(const json& j) {
  SoftFold f;
  f.weights = vec_from(j.at("weights"));
  f.objective = j.at("objective").get<double>();
  f.min_vertex_objective = j.at("min_vertex_objective").get<double>();
  f.init_objective_spread = j.at("init_objective_spread").get<double>();
  f.weight_linf_spread = j.at("weight_linf_spread").get<double>();
  f.full_rank = j.at("full_rank").get<bool>();
  f.converged = j.at("converged").get<bool>();
  f.kkt_residual = j.at("kkt_residual").get<double>();
  f.min_singular_value = j.at("min_singular_value").get<double>();
  f.mean_error = j.at("mean_error").get<double>();
  f.ambiguity = j.at("ambiguity").get<double>();
  f.ensemble_error = j.at("ensemble_error").get<double>();
  f.mean_disagreement = j.at("mean_disagreement").get<double>();
  f.n_correct = j.at("n_correct").get<Index>();
  f.n_incorrect = j.at("n_incorrect").get<Index>();
  f.sum_v_correct = j.at("sum_v_correct").get<double>();
  f.sum_v_incorrect = j.at("sum_v_incorrect").get<double>();
  for (const auto& p : j.at("selective")) {
    f.selective.push_back({p.at("quantile").get<double>(), p.at("threshold").get<double>(),
                           p.at("coverage").get<double>(), p.at("accuracy").get<double>()});
  }
  f.specialist_scores = j.at("specialist_scores").get<std::vector<double>>();
  return f;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t combine_digests(const std::vector<std::uint64_t>& digests) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (auto d : digests) h = mix64(h ^ d);
  return h;
}

}  // namespace

json to_json(const RunResult& r) {
  json j = {{"schema_version", 1},
            {"dataset", r.dataset},
            {"method", r.method},
            {"task", to_string(r.task)},
            {"fold_scores", r.fold_scores},
            {"mean", r.mean},
            {"sd", r.sd},
            {"error", r.error},
            {"digests", r.digests}};
  if (!r.members.empty()) {
    j["members"] = r.members;
    j["chosen"] = r.chosen;
  }
  if (!r.soft.empty() || !r.specialist_ids.empty()) {
    j["specialist_ids"] = r.specialist_ids;
    j["specialist_families"] = r.specialist_families;
    j["piecewise_constant"] = r.piecewise_constant;
    json folds = json::array();
    for (const auto& f : r.soft) folds.push_back(to_json(f));
    j["soft_learning"] = std::move(folds);
  }
  return j;
}

RunResult run_result_from_json(const json& j) {
  RunResult r;
  try {
    r.dataset = j.at("dataset").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.task = task_from_string(j.at("task").get<std::string>());
    r.fold_scores = j.at("fold_scores").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.sd = j.at("sd").get<double>();
    r.error = j.at("error").get<std::string>();
    r.digests = j.at("digests").get<std::vector<std::string>>();
    if (j.contains("members")) {
      r.members = j.at("members").get<std::vector<std::string>>();
      r.chosen = j.at("chosen").get<std::string>();
    }
    if (j.contains("soft_learning")) {
      r.specialist_ids = j.at("specialist_ids").get<std::vector<std::string>>();
      r.specialist_families = j.at("specialist_families").get<std::vector<std::string>>();
      r.piecewise_constant = j.at("piecewise_constant").get<std::vector<bool>>();
      for (const auto& f : j.at("soft_learning")) r.soft.push_back(soft_fold_from_json(f));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("run result: ") + e.what());
  }
  return r;
}

void ResultStore::add(RunResult r) {
  auto key = std::make_pair(r.dataset, r.method);
  if (results.count(key)) throw Error(ErrorCode::Config, "duplicate result for (" + r.dataset + ", " + r.method + ")");
  results.emplace(std::move(key), std::move(r));
}

const RunResult* ResultStore::find(const std::string& dataset, const std::string& method) const {
  const auto it = results.find({dataset, method});
  return it == results.end() ? nullptr : &it->second;
}

std::vector<std::string> ResultStore::failed_cells() const {
  std::vector<std::string> out;
  for (const auto& [key, r] : results) {
    if (!r.ok()) out.push_back(key.first + "/" + key.second + ": " + r.error);
  }
  return out;
}

namespace {

std::string cell_file(const std::string& dataset, const std::string& method) {
  return dataset + "__" + method + ".json";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "'" + path.string() + "': " + e.what());
  }
}

}  // namespace

void save_store(const ResultStore& store, const std::string& dir) {
  fs::create_directories(dir);
  json index = {{"format_version", store.format_version}, {"seed", store.seed}, {"folds", store.folds},
                {"methods", store.methods}};
  json datasets = json::array();
  for (const auto& d : store.datasets) {
    datasets.push_back({{"name", d.name}, {"task", to_string(d.task)}, {"n", d.n}, {"d", d.d},
                        {"n_classes", d.n_classes}});
  }
  index["datasets"] = std::move(datasets);
  json cells = json::array();
  json timings = json::object();
  for (const auto& [key, r] : store.results) {
    const std::string file = cell_file(key.first, key.second);
    cells.push_back({{"dataset", key.first}, {"method", key.second}, {"file", file}});
    write_text(fs::path(dir) / file, to_json(r).dump(2) + "\n");
    timings[key.first][key.second] = r.seconds;
  }
  index["cells"] = std::move(cells);
  write_text(fs::path(dir) / "index.json", index.dump(2) + "\n");
  write_text(fs::path(dir) / "timings.json", timings.dump(2) + "\n");
}

ResultStore load_store(const std::string& dir) {
  const json index = read_json(fs::path(dir) / "index.json");
  ResultStore store;
  try {
    store.format_version = index.at("format_version").get<int>();
    if (store.format_version != 1) throw Error(ErrorCode::Parse, "unsupported store format version");
    store.seed = index.at("seed").get<std::uint64_t>();
    store.folds = index.at("folds").get<int>();
    store.methods = index.at("methods").get<std::vector<std::string>>();
    for (const auto& d : index.at("datasets")) {
      store.datasets.push_back({d.at("name").get<std::string>(), task_from_string(d.at("task").get<std::string>()),
                                d.at("n").get<Index>(), d.at("d").get<Index>(), d.at("n_classes").get<int>()});
    }
    json timings = json::object();
    if (fs::exists(fs::path(dir) / "timings.json")) timings = read_json(fs::path(dir) / "timings.json");
    for (const auto& c : index.at("cells")) {
      RunResult r = run_result_from_json(read_json(fs::path(dir) / c.at("file").get<std::string>()));
      if (timings.contains(r.dataset) && timings[r.dataset].contains(r.method)) {
        r.seconds = timings[r.dataset][r.method].get<double>();
      }
      store.add(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("store index: ") + e.what());
  }
  return store;
}

// --- benchmark -----------------------------------------------------------------------

std::vector<std::string> best_of_3_members(TaskKind task) {
  if (task == TaskKind::Classification) return {"logistic_c1", "random_forest", "hist_gradient_boosting"};
  return {"ridge", "random_forest", "hist_gradient_boosting"};
}

std::string size_bucket(Index n) {
  if (n < 500) return "small";
  if (n <= 5000) return "medium";
  return "large";
}

double ranking_score(double mean) { return std::round(mean * 1e9) / 1e9; }

namespace {

struct CellFold {
  double score = 0.0;
  std::string error;
  std::uint64_t digest = 0;
  double seconds = 0.0;
};

/// Outcome of one (dataset, outer fold) unit.
struct UnitOutcome {
  CellFold soft;
  SoftFold soft_detail;
  std::vector<CellFold> specialists;  // library order
};

double score_of(const Dataset& test, const Matrix& prediction) {
  if (test.task() == TaskKind::Classification) return accuracy(argmax_rows(prediction), test.labels.classes());
  return r_squared(prediction.col(0), test.labels.targets());
}

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(to_string(err->code())) + ": " + e.what();
  return e.what();
}

/// Labels of rows in `rows` replaced by values no model should ever see.
void corrupt_labels(Dataset& data, const std::vector<Index>& rows) {
  if (data.task() == TaskKind::Classification) {
    std::vector<int> y = data.labels.classes();
    const int C = data.labels.n_classes();
    for (Index i : rows) y[static_cast<size_t>(i)] = (y[static_cast<size_t>(i)] + 1) % C;
    data.labels = LabelVector::classification(std::move(y), C);
  } else {
    Vector y = data.labels.targets();
    for (Index i : rows) y(i) = -y(i) + 1e6;
    data.labels = LabelVector::regression(std::move(y));
  }
}

void fill_soft_detail(const SoftLearner& model, const Dataset& test, SoftFold& f) {
  const auto& rep = model.solve_report();
  f.weights = model.weights();
  f.objective = rep.objective;
  f.min_vertex_objective = vertex_objectives(model.problem()).minCoeff();
  f.full_rank = !rep.rank_deficient;
  f.converged = rep.converged;
  f.kkt_residual = rep.kkt_residual;
  f.min_singular_value = rep.min_singular_value;
  const auto [lo, hi] = std::minmax_element(rep.init_objectives.begin(), rep.init_objectives.end());
  f.init_objective_spread = *hi - *lo;
  f.weight_linf_spread = 0.0;
  for (const auto& w : rep.init_solutions) {
    f.weight_linf_spread = std::max(f.weight_linf_spread, (w - rep.solution).lpNorm<Eigen::Infinity>());
  }

  const auto preds = model.specialist_predictions(test.features);
  const Matrix targets = test.task() == TaskKind::Classification ? one_hot(test.labels) : Matrix(test.labels.targets());
  const auto kv = kv_decomposition(preds, model.weights(), targets);
  f.mean_error = kv.mean_error;
  f.ambiguity = kv.ambiguity;
  f.ensemble_error = kv.ensemble_error;
  for (const auto& p : preds) {
    double s = 0.0;
    try {
      s = score_of(test, p);
    } catch (const Error&) {
      s = std::numeric_limits<double>::quiet_NaN();
    }
    f.specialist_scores.push_back(s);
  }
  if (test.task() != TaskKind::Classification) return;
  const Index K = static_cast<Index>(preds.size());
  if (K > 1) f.mean_disagreement = kv.disagreement.sum() / static_cast<double>(K * (K - 1));
  const Vector v = weighted_variance(preds, model.weights());
  const auto labels = argmax_rows(combine(preds, model.weights()));
  const auto& truth = test.labels.classes();
  for (size_t i = 0; i < truth.size(); ++i) {
    if (labels[i] == truth[i]) {
      ++f.n_correct;
      f.sum_v_correct += v(static_cast<Index>(i));
    } else {
      ++f.n_incorrect;
      f.sum_v_incorrect += v(static_cast<Index>(i));
    }
  }
  f.selective = selective_curve(labels, truth, v);
}

UnitOutcome run_unit(const Dataset& data, const FoldAssignment& outer, int fold, const BenchConfig& config,
                     bool want_soft, const std::vector<size_t>& wanted, const RunOptions& options) {
  const SpecialistLibrary library = default_library(data.task(), config.seed);
  const auto K = static_cast<size_t>(library.size());
  UnitOutcome out;
  out.specialists.assign(K, CellFold{});

  Dataset work = data;
  const auto test_rows = outer.test_rows(fold);
  if (options.corrupt_test_labels) corrupt_labels(work, test_rows);
  Dataset train = work.subset(outer.train_rows(fold));
  Dataset test = work.subset(test_rows);
  const Standardizer scaler = fit_standardizer(train.features);
  train.features = apply_standardizer(scaler, train.features);
  test.features = apply_standardizer(scaler, test.features);

  const std::uint64_t unit_seed = derive_seed(config.seed, fnv1a(data.name), static_cast<std::uint64_t>(fold));
  const int inner = config.inner_folds > 0 ? config.inner_folds : default_fold_count(train.n());

  bool reuse = false;
  if (want_soft) {
    const auto start = std::chrono::steady_clock::now();
    try {
      SoftLearnerOptions so;
      so.n_folds = inner;
      so.seed = unit_seed;
      so.keep_oof = false;
      so.record_digests = true;
      const SoftLearner model = SoftLearner::fit(library, train, so);
      out.soft.score = score_of(test, model.predict_matrix(test.features));
      out.soft.digest = combine_digests(model.state_digests());
      fill_soft_detail(model, test, out.soft_detail);
      for (size_t k = 0; k < K; ++k) {
        auto& cell = out.specialists[k];
        cell.score = out.soft_detail.specialist_scores[k];
        if (std::isnan(cell.score)) cell.error = "score undefined on this fold";
        cell.digest = state_digest(model.specialists()[k]);
        cell.seconds = model.refit_seconds()[k];
      }
      reuse = true;
    } catch (const std::exception& e) {
      out.soft.error = "fold " + std::to_string(fold) + ": " + describe(e);
    }
    out.soft.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  if (reuse) return out;

  // Stand-alone fits reproduce the Soft Learning refit exactly: same
  // standardization and the same seed.
  Dataset full = train;
  const Standardizer inner_scaler = fit_standardizer(train.features);
  full.features = apply_standardizer(inner_scaler, train.features);
  const Matrix test_x = apply_standardizer(inner_scaler, test.features);
  for (size_t k : wanted) {
    auto& cell = out.specialists[k];
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto model = fit(library.specialists[k], full, derive_seed(unit_seed, k, static_cast<std::uint64_t>(inner)));
      cell.score = score_of(test, model.predict_matrix(test_x));
      cell.digest = state_digest(model);
    } catch (const std::exception& e) {
      cell.error = "fold " + std::to_string(fold) + ": " + describe(e);
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

void finish_scores(RunResult& r) {
  if (!r.ok() || r.fold_scores.empty()) return;
  double sum = 0.0;
  for (double s : r.fold_scores) sum += s;
  r.mean = sum / static_cast<double>(r.fold_scores.size());
  double ss = 0.0;
  for (double s : r.fold_scores) ss += (s - r.mean) * (s - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(r.fold_scores.size()));
}

/// Roster for one task, in configured order.
std::vector<std::string> expand_roster(const BenchConfig& config, TaskKind task) {
  const auto library = default_library(task);
  std::vector<std::string> out;
  for (const auto& m : config.methods) {
    if (m == kAllSpecialists) {
      for (const auto& s : library.specialists) {
        if (std::find(out.begin(), out.end(), s.id) == out.end()) out.push_back(s.id);
      }
    } else if (m == kSoftLearning || m == kBestOf3) {
      out.push_back(m);
    } else {
      const bool present = std::any_of(library.specialists.begin(), library.specialists.end(),
                                       [&](const SpecialistConfig& s) { return s.id == m; });
      if (present && std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
  }
  return out;
}

}  // namespace

ResultStore run_benchmark(const BenchConfig& config, const RunOptions& options) {
  config.validate();
  std::vector<Dataset> datasets;
  for (const auto& entry : load_manifest(config.manifest)) datasets.push_back(materialize(entry));
  return run_benchmark(config, datasets, options);
}

ResultStore run_benchmark(const BenchConfig& config, const std::vector<Dataset>& datasets, const RunOptions& options) {
  config.validate();
  ResultStore store;
  store.seed = config.seed;
  store.folds = config.folds;
  for (const auto& data : datasets) {
    data.validate();
    store.datasets.push_back({data.name, data.task(), data.n(), data.d(), data.labels.n_classes()});
    for (const auto& m : expand_roster(config, data.task())) {
      if (std::find(store.methods.begin(), store.methods.end(), m) == store.methods.end()) store.methods.push_back(m);
    }
  }

  struct Plan {
    FoldAssignment outer;
    std::vector<std::string> roster;
    SpecialistLibrary library;
    bool want_soft = false;
    std::vector<size_t> wanted;  // specialist indices needed (roster or best-of-3)
  };
  std::vector<Plan> plans(datasets.size());
  std::vector<std::pair<size_t, int>> units;
  for (size_t ds = 0; ds < datasets.size(); ++ds) {
    auto& plan = plans[ds];
    const auto& data = datasets[ds];
    plan.roster = expand_roster(config, data.task());
    plan.library = default_library(data.task(), config.seed);
    plan.outer = make_folds(data.labels, config.folds, config.seed);
    plan.want_soft = std::find(plan.roster.begin(), plan.roster.end(), kSoftLearning) != plan.roster.end();
    std::set<std::string> needed(plan.roster.begin(), plan.roster.end());
    if (needed.count(kBestOf3)) {
      for (const auto& m : best_of_3_members(data.task())) needed.insert(m);
    }
    for (size_t k = 0; k < plan.library.specialists.size(); ++k) {
      if (needed.count(plan.library.specialists[k].id)) plan.wanted.push_back(k);
    }
    for (int v = 0; v < config.folds; ++v) units.emplace_back(ds, v);
  }

  std::vector<UnitOutcome> outcomes(units.size());
  parallel_for(units.size(), config.jobs, [&](size_t u) {
    const auto [ds, v] = units[u];
    if (options.verbose) {
      std::fprintf(stderr, "[%zu/%zu] %s fold %d\n", u + 1, units.size(), datasets[ds].name.c_str(), v);
    }
    outcomes[u] = run_unit(datasets[ds], plans[ds].outer, v, config, plans[ds].want_soft, plans[ds].wanted, options);
  });

  for (size_t ds = 0; ds < datasets.size(); ++ds) {
    const auto& data = datasets[ds];
    const auto& plan = plans[ds];
    std::map<std::string, RunResult> cells;
    auto base = [&](const std::string& method) {
      RunResult r;
      r.dataset = data.name;
      r.method = method;
      r.task = data.task();
      return r;
    };
    std::vector<size_t> unit_idx;
    for (size_t u = 0; u < units.size(); ++u) {
      if (units[u].first == ds) unit_idx.push_back(u);
    }
    if (plan.want_soft) {
      RunResult r = base(kSoftLearning);
      for (const auto& s : plan.library.specialists) {
        r.specialist_ids.push_back(s.id);
        r.specialist_families.push_back(to_string(s.family()));
        r.piecewise_constant.push_back(is_piecewise_constant(s));
      }
      for (size_t u : unit_idx) {
        const auto& o = outcomes[u];
        if (!o.soft.error.empty() && r.error.empty()) r.error = o.soft.error;
        r.fold_scores.push_back(o.soft.score);
        r.digests.push_back(hex64(o.soft.digest));
        r.seconds += o.soft.seconds;
        r.soft.push_back(o.soft_detail);
      }
      if (!r.ok()) {
        r.fold_scores.clear();
        r.soft.clear();
      }
      finish_scores(r);
      cells.emplace(r.method, std::move(r));
    }
    for (size_t k : plan.wanted) {
      RunResult r = base(plan.library.specialists[k].id);
      for (size_t u : unit_idx) {
        const auto& c = outcomes[u].specialists[k];
        if (!c.error.empty() && r.error.empty()) r.error = c.error;
        r.fold_scores.push_back(c.score);
        r.digests.push_back(hex64(c.digest));
        r.seconds += c.seconds;
      }
      if (!r.ok()) r.fold_scores.clear();
      finish_scores(r);
      cells.emplace(r.method, std::move(r));
    }
    if (std::find(plan.roster.begin(), plan.roster.end(), kBestOf3) != plan.roster.end()) {
      RunResult r = base(kBestOf3);
      r.members = best_of_3_members(data.task());
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& m : r.members) {
        const auto& member = cells.at(m);
        if (!member.ok()) {
          r.error = "member " + m + " failed";
          break;
        }
        if (member.mean > best) {
          best = member.mean;
          r.chosen = m;
        }
      }
      if (r.ok()) {
        r.fold_scores = cells.at(r.chosen).fold_scores;
        finish_scores(r);
      }
      cells.emplace(r.method, std::move(r));
    }
    for (const auto& m : plan.roster) store.add(std::move(cells.at(m)));
  }
  return store;
}

}  // namespace softlearn
