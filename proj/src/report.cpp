#include "softlearn/bench.hpp"
#include "softlearn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace softlearn {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, ReportSummary& summary) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    summary.files.push_back(path.filename().string());
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  ~CsvFile() { out_.flush(); }

 private:
  fs::path path_;
  std::ofstream out_;
};

struct Group {
  std::string name;
  std::vector<std::string> datasets;
  std::vector<std::string> methods;  // present and successful on every dataset
};

std::vector<std::string> common_methods(const ResultStore& store, const std::vector<std::string>& datasets) {
  std::vector<std::string> out;
  for (const auto& m : store.methods) {
    const bool everywhere = std::all_of(datasets.begin(), datasets.end(), [&](const std::string& d) {
      const auto* r = store.find(d, m);
      return r && r->ok();
    });
    if (everywhere) out.push_back(m);
  }
  return out;
}

Matrix mean_scores(const ResultStore& store, const Group& g) {
  Matrix s(static_cast<Index>(g.methods.size()), static_cast<Index>(g.datasets.size()));
  for (size_t m = 0; m < g.methods.size(); ++m) {
    for (size_t d = 0; d < g.datasets.size(); ++d) {
      s(static_cast<Index>(m), static_cast<Index>(d)) = ranking_score(store.find(g.datasets[d], g.methods[m])->mean);
    }
  }
  return s;
}

std::vector<double> row_of(const Matrix& s, size_t m) {
  std::vector<double> out(static_cast<size_t>(s.cols()));
  for (Index d = 0; d < s.cols(); ++d) out[static_cast<size_t>(d)] = s(static_cast<Index>(m), d);
  return out;
}

}  // namespace

ReportSummary emit_report(const ResultStore& store, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  ReportSummary summary;

  for (const auto& d : store.datasets) {
    for (const auto& m : store.methods) {
      const auto* r = store.find(d.name, m);
      if (!r) {
        const bool applicable = std::any_of(store.results.begin(), store.results.end(), [&](const auto& kv) {
          return kv.first.second == m && kv.second.task == d.task;
        }) || m == kSoftLearning || m == kBestOf3;
        if (applicable) summary.missing.push_back(d.name + "/" + m + ": missing");
      } else if (!r->ok()) {
        summary.missing.push_back(d.name + "/" + m + ": " + r->error);
      }
    }
  }
  if (!summary.missing.empty()) {
    std::ofstream out(dir / "missing.txt", std::ios::binary);
    for (const auto& line : summary.missing) out << line << '\n';
    summary.files.push_back("missing.txt");
  }

  // (a) score matrix
  {
    CsvFile csv(dir / "scores.csv", summary);
    std::vector<std::string> header{"dataset", "task", "n", "d", "classes"};
    for (const auto& m : store.methods) {
      header.push_back(m + "_mean");
      header.push_back(m + "_sd");
    }
    csv.row(header);
    for (const auto& d : store.datasets) {
      std::vector<std::string> row{d.name, to_string(d.task), std::to_string(d.n), std::to_string(d.d),
                                   std::to_string(d.n_classes)};
      for (const auto& m : store.methods) {
        const auto* r = store.find(d.name, m);
        row.push_back(r && r->ok() ? num(r->mean) : "");
        row.push_back(r && r->ok() ? num(r->sd) : "");
      }
      csv.row(row);
    }
  }
  if (store.methods.size() < 2) return summary;

  std::vector<Group> groups;
  Group all{"all", {}, {}};
  Group clf{"classification", {}, {}};
  Group reg{"regression", {}, {}};
  for (const auto& d : store.datasets) {
    all.datasets.push_back(d.name);
    (d.task == TaskKind::Classification ? clf : reg).datasets.push_back(d.name);
  }
  for (Group* g : {&all, &clf, &reg}) {
    if (g->datasets.empty()) continue;
    g->methods = common_methods(store, g->datasets);
    groups.push_back(*g);
  }

  // (b) ranks and Friedman / Nemenyi
  {
    CsvFile friedman(dir / "friedman.csv", summary);
    friedman.row({"group", "datasets", "methods", "chi2", "dof", "p_value", "nemenyi_cd_0.05"});
    for (const auto& g : groups) {
      if (g.methods.size() < 2) continue;
      const Matrix s = mean_scores(store, g);
      const RankTable table = rank_methods(s);
      CsvFile ranks(dir / ("ranks_" + g.name + ".csv"), summary);
      std::vector<std::string> header{"dataset"};
      header.insert(header.end(), g.methods.begin(), g.methods.end());
      ranks.row(header);
      for (size_t d = 0; d < g.datasets.size(); ++d) {
        std::vector<std::string> row{g.datasets[d]};
        for (size_t m = 0; m < g.methods.size(); ++m) row.push_back(num(table.ranks(static_cast<Index>(d), static_cast<Index>(m))));
        ranks.row(row);
      }
      std::vector<std::string> mean_row{"mean_rank"};
      for (Index m = 0; m < table.mean_rank.size(); ++m) mean_row.push_back(num(table.mean_rank(m)));
      ranks.row(mean_row);
      if (g.methods.size() >= 3 && g.datasets.size() >= 2) {
        const auto f = friedman_test(table);
        const int k = static_cast<int>(g.methods.size());
        const std::string cd = k <= 20 ? num(nemenyi_cd(k, static_cast<Index>(g.datasets.size()))) : "";
        friedman.row({g.name, std::to_string(g.datasets.size()), std::to_string(k), num(f.statistic), num(f.dof),
                      num(f.p_value), cd});
      }
    }
  }

  const Group& main = groups.front();
  const Matrix main_scores = mean_scores(store, main);

  // (c) Wilcoxon: Soft Learning against every other method
  const auto sl = std::find(main.methods.begin(), main.methods.end(), kSoftLearning);
  if (sl != main.methods.end()) {
    CsvFile csv(dir / "wilcoxon.csv", summary);
    csv.row({"method_a", "method_b", "n_effective", "w_plus", "exact", "p_two_sided", "p_one_sided_greater"});
    const auto a = row_of(main_scores, static_cast<size_t>(sl - main.methods.begin()));
    for (size_t m = 0; m < main.methods.size(); ++m) {
      if (main.methods[m] == kSoftLearning) continue;
      const auto b = row_of(main_scores, m);
      const auto two = wilcoxon_signed_rank(a, b, Sidedness::TwoSided);
      const auto one = wilcoxon_signed_rank(a, b, Sidedness::Greater);
      csv.row({kSoftLearning, main.methods[m], std::to_string(two.n_effective), num(two.statistic),
               two.exact ? "1" : "0", num(two.p_value), num(one.p_value)});
    }
  }

  // (d) win-tie-loss, row method against column method
  {
    CsvFile csv(dir / "win_tie_loss.csv", summary);
    std::vector<std::string> header{"method"};
    header.insert(header.end(), main.methods.begin(), main.methods.end());
    csv.row(header);
    for (size_t i = 0; i < main.methods.size(); ++i) {
      std::vector<std::string> row{main.methods[i]};
      for (size_t j = 0; j < main.methods.size(); ++j) {
        if (i == j) {
          row.push_back("");
          continue;
        }
        const auto w = win_tie_loss(row_of(main_scores, i), row_of(main_scores, j), 0.001);
        row.push_back(std::to_string(w.wins) + "/" + std::to_string(w.ties) + "/" + std::to_string(w.losses));
      }
      csv.row(row);
    }
  }

  // (e) Soft Learning weight allocations, averaged over outer folds
  {
    std::vector<const RunResult*> cells;
    for (const auto& d : store.datasets) {
      const auto* r = store.find(d.name, kSoftLearning);
      if (r && r->ok() && !r->soft.empty()) cells.push_back(r);
    }
    if (!cells.empty()) {
      CsvFile by_spec(dir / "weights_by_specialist.csv", summary);
      CsvFile by_family(dir / "weights_by_family.csv", summary);
      by_spec.row({"dataset", "specialist", "family", "weight"});
      std::set<std::string> family_set;
      for (const auto* r : cells) family_set.insert(r->specialist_families.begin(), r->specialist_families.end());
      const std::vector<std::string> families(family_set.begin(), family_set.end());
      std::vector<std::string> header{"dataset"};
      header.insert(header.end(), families.begin(), families.end());
      by_family.row(header);
      for (const auto* r : cells) {
        Vector w = Vector::Zero(static_cast<Index>(r->specialist_ids.size()));
        for (const auto& f : r->soft) w += f.weights;
        w /= static_cast<double>(r->soft.size());
        std::map<std::string, double> per_family;
        for (size_t k = 0; k < r->specialist_ids.size(); ++k) {
          by_spec.row({r->dataset, r->specialist_ids[k], r->specialist_families[k], num(w(static_cast<Index>(k)))});
          per_family[r->specialist_families[k]] += w(static_cast<Index>(k));
        }
        std::vector<std::string> row{r->dataset};
        for (const auto& f : families) row.push_back(num(per_family[f]));
        by_family.row(row);
      }
    }
  }

  // (f) breakdown by task and size bucket; ranks within each task's common methods
  {
    CsvFile csv(dir / "breakdown.csv", summary);
    csv.row({"task", "size", "method", "datasets", "mean_score", "mean_rank"});
    for (const auto& g : groups) {
      if (g.name == "all" || g.methods.empty()) continue;
      const Matrix s = mean_scores(store, g);
      const RankTable table = rank_methods(s);
      std::map<std::string, std::vector<size_t>> buckets;
      for (size_t d = 0; d < g.datasets.size(); ++d) {
        const auto info = std::find_if(store.datasets.begin(), store.datasets.end(),
                                       [&](const DatasetInfo& x) { return x.name == g.datasets[d]; });
        buckets[size_bucket(info->n)].push_back(d);
      }
      for (const char* bucket : {"small", "medium", "large"}) {
        const auto it = buckets.find(bucket);
        if (it == buckets.end()) continue;
        for (size_t m = 0; m < g.methods.size(); ++m) {
          double score = 0.0, rank = 0.0;
          for (size_t d : it->second) {
            score += s(static_cast<Index>(m), static_cast<Index>(d));
            rank += table.ranks(static_cast<Index>(d), static_cast<Index>(m));
          }
          const auto count = static_cast<double>(it->second.size());
          csv.row({g.name, bucket, g.methods[m], std::to_string(it->second.size()), num(score / count),
                   num(rank / count)});
        }
      }
    }
  }
  return summary;
}

}  // namespace softlearn
