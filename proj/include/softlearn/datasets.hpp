#pragma once

#include "softlearn/core.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace softlearn {

/// Parameters of one synthetic dataset. `params` holds generator-specific
/// extras (separation, factor, minority, sparsity, pad_noise).
struct SyntheticSpec {
  std::string name;
  std::string generator;
  Index n = 0;
  Index d = 0;
  int n_classes = 2;
  double noise = 0.0;
  double label_noise = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
};

/// Known generator ids.
const std::vector<std::string>& generator_names();
/// Task produced by a generator id.
TaskKind generator_task(const std::string& generator);

/// Deterministic synthetic dataset; classification outputs contain every class.
Dataset generate(const SyntheticSpec& spec);

/// Flips each label with probability p to a uniformly chosen other class.
Dataset inject_label_noise(const Dataset& data, double p, std::uint64_t seed);

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const nlohmann::json& j);

/// CSV ingestion. label_names is filled on load with the sorted label
/// encoding (numeric order when every label parses as a number).
struct CsvSchema {
  std::string target = "target";
  TaskKind task = TaskKind::Classification;
  std::vector<std::string> header;
  std::vector<std::string> label_names;
};

Dataset read_csv(std::istream& in, CsvSchema& schema, const std::string& name = "");
Dataset load_csv(const std::string& path, CsvSchema& schema);
void write_csv(const Dataset& data, std::ostream& out, const CsvSchema* schema = nullptr);
void write_csv(const Dataset& data, const std::string& path, const CsvSchema* schema = nullptr);

/// A manifest entry is either a synthetic spec or a CSV reference
/// ({"name", "csv", "target", "task"}; relative paths resolve against the
/// manifest directory).
struct ManifestEntry {
  std::string name;
  bool is_csv = false;
  SyntheticSpec spec;
  std::string csv_path;
  CsvSchema schema;
};

/// Accepts a JSON list of entries or an object with a "datasets" list.
std::vector<ManifestEntry> parse_manifest(const nlohmann::json& j, const std::string& base_dir = ".");
std::vector<ManifestEntry> load_manifest(const std::string& path);
Dataset materialize(const ManifestEntry& entry);

}  // namespace softlearn
