#include "softlearn/datasets.hpp"

#include "softlearn/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace softlearn {

using nlohmann::json;

double SyntheticSpec::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names{"friedman1", "friedman2", "friedman3", "moons", "circles",
                                              "hastie", "xor_manifold", "gaussian_classes",
                                              "imbalanced_binary", "sparse_linear"};
  return names;
}

TaskKind generator_task(const std::string& generator) {
  if (generator == "friedman1" || generator == "friedman2" || generator == "friedman3" ||
      generator == "sparse_linear") {
    return TaskKind::Regression;
  }
  if (std::find(generator_names().begin(), generator_names().end(), generator) == generator_names().end()) {
    throw Error(ErrorCode::Config, "unknown generator '" + generator + "'");
  }
  return TaskKind::Classification;
}

namespace {

void require(bool ok, const SyntheticSpec& spec, const std::string& what) {
  if (!ok) throw Error(ErrorCode::Config, spec.generator + " '" + spec.name + "': " + what);
}

/// Fills columns [from, d) with standard normal noise features.
void pad_noise(Matrix& x, Index from, double scale, Rng& rng) {
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = from; j < x.cols(); ++j) x(i, j) = scale * rng.normal();
  }
}

Vector random_unit(Index d, Rng& rng) {
  Vector u(d);
  for (Index j = 0; j < d; ++j) u(j) = rng.normal();
  return u / u.norm();
}

Dataset regression(const SyntheticSpec& spec, Matrix x, Vector y) {
  return {spec.name, std::move(x), LabelVector::regression(std::move(y))};
}

Dataset classification(const SyntheticSpec& spec, Matrix x, std::vector<int> y, int n_classes) {
  return {spec.name, std::move(x), LabelVector::classification(std::move(y), n_classes)};
}

Dataset friedman1(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 10;
  require(d >= 5, spec, "friedman1 needs d >= 5");
  Matrix x(spec.n, d);
  Vector y(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform();
    y(i) = 10.0 * std::sin(std::numbers::pi * x(i, 0) * x(i, 1)) + 20.0 * std::pow(x(i, 2) - 0.5, 2) +
           10.0 * x(i, 3) + 5.0 * x(i, 4) + spec.noise * rng.normal();
  }
  return regression(spec, std::move(x), std::move(y));
}

/// Friedman #2 (kind 2) and #3 (kind 3) share inputs
/// x1 ~ U(0,100), x2 ~ U(40pi, 560pi), x3 ~ U(0,1), x4 ~ U(1,11).
Dataset friedman23(const SyntheticSpec& spec, Rng& rng, int kind) {
  const Index d = spec.d > 0 ? spec.d : 4;
  require(d >= 4, spec, "needs d >= 4");
  Matrix x(spec.n, d);
  Vector y(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    x(i, 0) = rng.uniform(0.0, 100.0);
    x(i, 1) = rng.uniform(40.0 * std::numbers::pi, 560.0 * std::numbers::pi);
    x(i, 2) = rng.uniform();
    x(i, 3) = rng.uniform(1.0, 11.0);
    for (Index j = 4; j < d; ++j) x(i, j) = rng.uniform();
    const double inner = x(i, 1) * x(i, 2) - 1.0 / (x(i, 1) * x(i, 3));
    const double clean = kind == 2 ? std::sqrt(x(i, 0) * x(i, 0) + inner * inner) : std::atan(inner / x(i, 0));
    y(i) = clean + spec.noise * rng.normal();
  }
  return regression(spec, std::move(x), std::move(y));
}

Dataset moons(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 2;
  require(d >= 2, spec, "moons needs d >= 2");
  Matrix x(spec.n, d);
  std::vector<int> y(static_cast<size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform(0.0, std::numbers::pi);
    x(i, 0) = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    x(i, 1) = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x(i, 0) += spec.noise * rng.normal();
    x(i, 1) += spec.noise * rng.normal();
    y[static_cast<size_t>(i)] = label;
  }
  pad_noise(x, 2, spec.param("pad_noise", 1.0), rng);
  return classification(spec, std::move(x), std::move(y), 2);
}

Dataset circles(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 2;
  const double factor = spec.param("factor", 0.5);
  require(d >= 2, spec, "circles needs d >= 2");
  require(factor > 0.0 && factor < 1.0, spec, "factor must lie in (0, 1)");
  Matrix x(spec.n, d);
  std::vector<int> y(static_cast<size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = label == 0 ? 1.0 : factor;
    x(i, 0) = r * std::cos(t) + spec.noise * rng.normal();
    x(i, 1) = r * std::sin(t) + spec.noise * rng.normal();
    y[static_cast<size_t>(i)] = label;
  }
  pad_noise(x, 2, spec.param("pad_noise", 1.0), rng);
  return classification(spec, std::move(x), std::move(y), 2);
}

/// Median of chi-square with d degrees of freedom; 9.34 at d = 10,
/// Wilson-Hilferty otherwise.
double chi2_median(Index d) {
  if (d == 10) return 9.34;
  const double k = static_cast<double>(d);
  return k * std::pow(1.0 - 2.0 / (9.0 * k), 3);
}

Dataset hastie(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 10;
  const double threshold = chi2_median(d);
  Matrix x(spec.n, d);
  std::vector<int> y(static_cast<size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    y[static_cast<size_t>(i)] = x.row(i).squaredNorm() > threshold ? 1 : 0;
  }
  return classification(spec, std::move(x), std::move(y), 2);
}

Dataset xor_manifold(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 20;
  require(d >= 2, spec, "xor_manifold needs d >= 2");
  const double spread = spec.noise > 0.0 ? spec.noise : 0.3;
  const double pad = spec.param("pad_noise", 0.1);
  Matrix z(spec.n, d);
  std::vector<int> y(static_cast<size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const int quadrant = static_cast<int>(i % 4);
    const double sx = (quadrant & 1) ? 1.0 : -1.0;
    const double sy = (quadrant & 2) ? 1.0 : -1.0;
    z(i, 0) = sx + spread * rng.normal();
    z(i, 1) = sy + spread * rng.normal();
    y[static_cast<size_t>(i)] = sx * sy < 0 ? 1 : 0;
  }
  pad_noise(z, 2, pad, rng);
  Matrix g(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  const Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign convention that makes Q unique given g.
  for (Index j = 0; j < d; ++j) {
    if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
  }
  return classification(spec, z * q.transpose(), std::move(y), 2);
}

Dataset gaussian_classes(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 2;
  const int C = spec.n_classes;
  const double separation = spec.param("separation", 3.0);
  require(C >= 2, spec, "needs at least 2 classes");
  require(spec.n >= C, spec, "needs n >= C");
  Matrix centers(C, d);
  if (C == 2) {
    const Vector u = random_unit(d, rng);
    centers.row(0) = -0.5 * separation * u.transpose();
    centers.row(1) = 0.5 * separation * u.transpose();
  } else {
    for (Index c = 0; c < C; ++c) {
      for (Index j = 0; j < d; ++j) centers(c, j) = separation / std::numbers::sqrt2 * rng.normal();
    }
  }
  Matrix x(spec.n, d);
  std::vector<int> y(static_cast<size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const int label = static_cast<int>(i % C);
    for (Index j = 0; j < d; ++j) x(i, j) = centers(label, j) + rng.normal();
    y[static_cast<size_t>(i)] = label;
  }
  return classification(spec, std::move(x), std::move(y), C);
}

Dataset imbalanced_binary(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 2;
  const double minority = spec.param("minority", 0.03);
  const double separation = spec.param("separation", 2.0);
  require(minority > 0.0 && minority < 0.5, spec, "minority must lie in (0, 0.5)");
  const Index n_minor = std::max<Index>(2, std::llround(minority * static_cast<double>(spec.n)));
  require(spec.n > n_minor, spec, "n too small for the minority share");
  const Vector u = random_unit(d, rng);
  Matrix x(spec.n, d);
  std::vector<int> y(static_cast<size_t>(spec.n));
  // Minority rows spread evenly through the sample.
  for (Index i = 0; i < spec.n; ++i) {
    const int label = (i * n_minor) / spec.n != ((i + 1) * n_minor) / spec.n ? 1 : 0;
    const double shift = label == 1 ? separation : 0.0;
    for (Index j = 0; j < d; ++j) x(i, j) = shift * u(j) + rng.normal();
    y[static_cast<size_t>(i)] = label;
  }
  return classification(spec, std::move(x), std::move(y), 2);
}

Dataset sparse_linear(const SyntheticSpec& spec, Rng& rng) {
  const Index d = spec.d > 0 ? spec.d : 200;
  const auto s = static_cast<Index>(spec.param("sparsity", 10.0));
  require(s >= 1 && s <= d, spec, "sparsity must lie in [1, d]");
  std::vector<Index> features(static_cast<size_t>(d));
  for (Index j = 0; j < d; ++j) features[static_cast<size_t>(j)] = j;
  rng.shuffle(features);
  Vector w = Vector::Zero(d);
  for (Index j = 0; j < s; ++j) w(features[static_cast<size_t>(j)]) = rng.normal();
  Matrix x(spec.n, d);
  for (Index i = 0; i < spec.n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  Vector y = x * w;
  for (Index i = 0; i < spec.n; ++i) y(i) += spec.noise * rng.normal();
  return regression(spec, std::move(x), std::move(y));
}

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
  const TaskKind task = generator_task(spec.generator);
  require(spec.n >= 2, spec, "n must be at least 2");
  require(spec.noise >= 0.0, spec, "noise must be non-negative");
  require(spec.label_noise >= 0.0 && spec.label_noise < 1.0, spec, "label_noise must lie in [0, 1)");
  require(task == TaskKind::Classification || spec.label_noise == 0.0, spec, "label noise needs classification");
  Rng rng(spec.seed);
  Dataset out;
  const auto& g = spec.generator;
  if (g == "friedman1") out = friedman1(spec, rng);
  else if (g == "friedman2") out = friedman23(spec, rng, 2);
  else if (g == "friedman3") out = friedman23(spec, rng, 3);
  else if (g == "moons") out = moons(spec, rng);
  else if (g == "circles") out = circles(spec, rng);
  else if (g == "hastie") out = hastie(spec, rng);
  else if (g == "xor_manifold") out = xor_manifold(spec, rng);
  else if (g == "gaussian_classes") out = gaussian_classes(spec, rng);
  else if (g == "imbalanced_binary") out = imbalanced_binary(spec, rng);
  else out = sparse_linear(spec, rng);
  if (spec.label_noise > 0.0) out = inject_label_noise(out, spec.label_noise, derive_seed(spec.seed, 1));
  if (task == TaskKind::Classification) out.labels.require_all_classes();
  return out;
}

Dataset inject_label_noise(const Dataset& data, double p, std::uint64_t seed) {
  if (data.task() != TaskKind::Classification) {
    throw Error(ErrorCode::TaskMismatch, "label noise applies to classification data only");
  }
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::Config, "label noise probability must lie in [0, 1)");
  const int C = data.labels.n_classes();
  std::vector<int> y = data.labels.classes();
  Rng rng(seed);
  for (auto& label : y) {
    if (rng.uniform() < p) label = static_cast<int>((label + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(C - 1)))) % C);
  }
  Dataset out = data;
  out.labels = LabelVector::classification(std::move(y), C);
  return out;
}

json to_json(const SyntheticSpec& spec) {
  json j = {{"name", spec.name}, {"generator", spec.generator}, {"n", spec.n}, {"d", spec.d},
            {"n_classes", spec.n_classes}, {"noise", spec.noise}, {"label_noise", spec.label_noise},
            {"seed", spec.seed}};
  if (!spec.params.empty()) j["params"] = spec.params;
  return j;
}

SyntheticSpec spec_from_json(const json& j) {
  SyntheticSpec spec;
  try {
    spec.generator = j.at("generator").get<std::string>();
    spec.name = j.value("name", spec.generator);
    spec.n = j.at("n").get<Index>();
    spec.d = j.value("d", Index{0});
    spec.n_classes = j.value("n_classes", 2);
    spec.noise = j.value("noise", 0.0);
    spec.label_noise = j.value("label_noise", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params")) spec.params = j.at("params").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("synthetic spec: ") + e.what());
  }
  generator_task(spec.generator);
  return spec;
}

// --- CSV ----------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  size_t start = 0;
  while (start < s.size() && (s[start] == ' ' || s[start] == '\t')) ++start;
  return s.substr(start);
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end && std::isfinite(value);
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset read_csv(std::istream& in, CsvSchema& schema, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw Error(ErrorCode::Parse, "CSV is empty");
  std::vector<std::string> header = split_line(trim(line));
  for (auto& h : header) h = trim(h);
  const auto target_it = std::find(header.begin(), header.end(), schema.target);
  if (target_it == header.end()) throw Error(ErrorCode::Parse, "CSV has no target column '" + schema.target + "'");
  const auto target_col = static_cast<size_t>(target_it - header.begin());
  if (header.size() < 2) throw Error(ErrorCode::Parse, "CSV needs at least one feature column");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> targets;
  size_t row = 0;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() < header.size()) cells.resize(header.size());
    if (cells.size() > header.size()) {
      throw Error(ErrorCode::Parse, "CSV row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                        " cells, header has " + std::to_string(header.size()));
    }
    std::vector<double> values;
    for (size_t c = 0; c < header.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (c == target_col) {
        if (cell.empty()) throw Error(ErrorCode::Parse, "CSV row " + std::to_string(row) + ", column '" + header[c] + "': missing value");
        targets.push_back(cell);
        continue;
      }
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw Error(ErrorCode::Parse, "CSV row " + std::to_string(row) + ", column '" + header[c] +
                                          "': " + (cell.empty() ? "missing value" : "not a number '" + cell + "'"));
      }
      values.push_back(v);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(ErrorCode::Parse, "CSV has a header but no rows");

  Dataset out;
  out.name = name;
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(header.size() - 1);
  out.features.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) out.features(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  schema.header = header;
  if (schema.task == TaskKind::Regression) {
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      if (!parse_double(targets[static_cast<size_t>(i)], y(i))) {
        throw Error(ErrorCode::Parse, "CSV row " + std::to_string(i + 1) + ", column '" + schema.target +
                                          "': not a number '" + targets[static_cast<size_t>(i)] + "'");
      }
    }
    out.labels = LabelVector::regression(std::move(y));
    schema.label_names.clear();
    return out;
  }
  std::vector<std::string> names = targets;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<double> numeric(names.size());
  bool all_numeric = true;
  for (size_t i = 0; i < names.size(); ++i) all_numeric = all_numeric && parse_double(names[i], numeric[i]);
  if (all_numeric) {
    std::vector<size_t> order(names.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return numeric[a] < numeric[b]; });
    std::vector<std::string> sorted;
    for (size_t i : order) sorted.push_back(names[i]);
    names = std::move(sorted);
  }
  if (names.size() < 2) throw Error(ErrorCode::DegenerateTraining, "CSV target has a single class");
  std::map<std::string, int> code;
  for (size_t i = 0; i < names.size(); ++i) code[names[i]] = static_cast<int>(i);
  std::vector<int> y;
  for (const auto& t : targets) y.push_back(code.at(t));
  out.labels = LabelVector::classification(std::move(y), static_cast<int>(names.size()));
  schema.label_names = std::move(names);
  return out;
}

Dataset load_csv(const std::string& path, CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read_csv(in, schema, std::filesystem::path(path).stem().string());
}

void write_csv(const Dataset& data, std::ostream& out, const CsvSchema* schema) {
  const std::string target = schema ? schema->target : "target";
  std::vector<std::string> names;
  if (schema && static_cast<Index>(schema->header.size()) == data.d() + 1) {
    for (const auto& h : schema->header) {
      if (h != target) names.push_back(h);
    }
  }
  if (static_cast<Index>(names.size()) != data.d()) {
    names.clear();
    for (Index j = 0; j < data.d(); ++j) names.push_back("x" + std::to_string(j));
  }
  for (const auto& h : names) out << h << ',';
  out << target << '\n';
  const bool named = schema && data.task() == TaskKind::Classification &&
                     static_cast<int>(schema->label_names.size()) == data.labels.n_classes();
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.d(); ++j) out << format_double(data.features(i, j)) << ',';
    if (data.task() == TaskKind::Regression) {
      out << format_double(data.labels.targets()(i));
    } else {
      const int y = data.labels.classes()[static_cast<size_t>(i)];
      out << (named ? schema->label_names[static_cast<size_t>(y)] : std::to_string(y));
    }
    out << '\n';
  }
}

void write_csv(const Dataset& data, const std::string& path, const CsvSchema* schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_csv(data, out, schema);
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

// --- manifests ------------------------------------------------------------------

std::vector<ManifestEntry> parse_manifest(const json& j, const std::string& base_dir) {
  const json* list = &j;
  if (j.is_object()) {
    if (!j.contains("datasets")) throw Error(ErrorCode::Parse, "manifest object has no 'datasets' list");
    list = &j.at("datasets");
  }
  if (!list->is_array()) throw Error(ErrorCode::Parse, "manifest must be a list of dataset entries");
  std::vector<ManifestEntry> out;
  for (const auto& item : *list) {
    ManifestEntry entry;
    if (item.contains("csv")) {
      try {
        entry.is_csv = true;
        std::filesystem::path p = item.at("csv").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        entry.csv_path = p.string();
        entry.name = item.value("name", p.stem().string());
        entry.schema.target = item.value("target", std::string("target"));
        entry.schema.task = task_from_string(item.value("task", std::string("classification")));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("manifest csv entry: ") + e.what());
      }
    } else {
      entry.spec = spec_from_json(item);
      entry.name = entry.spec.name;
    }
    for (const auto& prev : out) {
      if (prev.name == entry.name) throw Error(ErrorCode::Config, "duplicate dataset name '" + entry.name + "' in manifest");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "manifest '" + path + "': " + e.what());
  }
  return parse_manifest(j, std::filesystem::path(path).parent_path().string());
}

Dataset materialize(const ManifestEntry& entry) {
  if (!entry.is_csv) return generate(entry.spec);
  CsvSchema schema = entry.schema;
  Dataset data = load_csv(entry.csv_path, schema);
  data.name = entry.name;
  return data;
}

}  // namespace softlearn
