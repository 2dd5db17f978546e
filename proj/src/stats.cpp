#include "softlearn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softlearn {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw Error(ErrorCode::Dimension, "accuracy: lengths must agree and be non-zero");
  }
  size_t hits = 0;
  for (size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double r_squared(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& truth) {
  if (predicted.size() != truth.size() || truth.size() == 0) {
    throw Error(ErrorCode::Dimension, "r_squared: lengths must agree and be non-zero");
  }
  const double ss_tot = (truth.array() - truth.mean()).square().sum();
  if (ss_tot <= 0.0) throw Error(ErrorCode::DegenerateTarget, "r_squared: constant truth");
  return 1.0 - (truth - predicted).squaredNorm() / ss_tot;
}

Vector average_ranks(const Eigen::Ref<const Vector>& scores) {
  const Index k = scores.size();
  std::vector<Index> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
  Vector ranks(k);
  for (Index start = 0; start < k;) {
    Index stop = start + 1;
    while (stop < k && scores(order[static_cast<size_t>(stop)]) == scores(order[static_cast<size_t>(start)])) ++stop;
    const double shared = 0.5 * static_cast<double>(start + 1 + stop);
    for (Index r = start; r < stop; ++r) ranks(order[static_cast<size_t>(r)]) = shared;
    start = stop;
  }
  return ranks;
}

RankTable rank_methods(const Matrix& scores, bool lower_is_better) {
  if (scores.rows() < 1 || scores.cols() < 1) throw Error(ErrorCode::Dimension, "rank_methods: empty score matrix");
  if (!scores.allFinite()) throw Error(ErrorCode::Coverage, "rank_methods: score matrix has missing cells");
  RankTable out;
  out.ranks.resize(scores.cols(), scores.rows());
  for (Index ds = 0; ds < scores.cols(); ++ds) {
    const Vector column = lower_is_better ? Vector(-scores.col(ds)) : Vector(scores.col(ds));
    out.ranks.row(ds) = average_ranks(column).transpose();
  }
  out.mean_rank = out.ranks.colwise().mean().transpose();
  return out;
}

double chi2_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  const double a = 0.5 * dof;
  const double z = 0.5 * x;
  const double log_prefix = a * std::log(z) - z - std::lgamma(a);
  if (z < a + 1.0) {
    // Series for the lower regularized gamma P(a, z).
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 1000; ++n) {
      term *= z / (a + n);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::max(0.0, 1.0 - std::exp(log_prefix) * sum);
  }
  // Continued fraction (modified Lentz) for the upper regularized gamma Q(a, z).
  const double tiny = 1e-300;
  double b = z + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(log_prefix) * h;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

FriedmanResult friedman_from_mean_ranks(const Eigen::Ref<const Vector>& mean_rank, Index n_datasets) {
  const Index k = mean_rank.size();
  if (k < 3) throw Error(ErrorCode::Protocol, "Friedman test needs at least 3 methods; use the Wilcoxon test");
  if (n_datasets < 2) throw Error(ErrorCode::Protocol, "Friedman test needs at least 2 datasets");
  const double kk = static_cast<double>(k);
  const double n = static_cast<double>(n_datasets);
  FriedmanResult out;
  out.statistic = 12.0 * n / (kk * (kk + 1.0)) * (mean_rank.squaredNorm() - kk * (kk + 1.0) * (kk + 1.0) / 4.0);
  if (out.statistic < 0.0 && out.statistic > -1e-9) out.statistic = 0.0;
  out.dof = static_cast<int>(k - 1);
  out.p_value = chi2_sf(out.statistic, out.dof);
  return out;
}

FriedmanResult friedman_test(const RankTable& ranks) {
  return friedman_from_mean_ranks(ranks.mean_rank, ranks.ranks.rows());
}

double nemenyi_q(int k, double alpha) {
  static constexpr double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
                                   3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
  static constexpr double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
                                   3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};
  if (k < 2 || k > 20) throw Error(ErrorCode::Config, "Nemenyi table covers k = 2..20");
  if (std::abs(alpha - 0.05) < 1e-12) return q05[k - 2];
  if (std::abs(alpha - 0.10) < 1e-12) return q10[k - 2];
  throw Error(ErrorCode::Config, "Nemenyi table covers alpha 0.05 and 0.10");
}

double nemenyi_cd(int k, Index n_datasets, double alpha) {
  if (n_datasets < 1) throw Error(ErrorCode::Config, "Nemenyi CD needs at least one dataset");
  return nemenyi_q(k, alpha) * std::sqrt(k * (k + 1.0) / (6.0 * static_cast<double>(n_datasets)));
}

const char* to_string(Sidedness s) {
  switch (s) {
    case Sidedness::TwoSided: return "two-sided";
    case Sidedness::Greater: return "greater";
    case Sidedness::Less: return "less";
  }
  return "?";
}

namespace {

struct SignedRanks {
  std::vector<double> ranks;  // absolute-value ranks of non-zero differences
  std::vector<bool> positive;
  double w_plus = 0.0;
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

SignedRanks signed_ranks(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::Dimension, "wilcoxon: lengths differ");
  std::vector<double> diff;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diff.push_back(d);
  }
  if (diff.empty()) throw Error(ErrorCode::DegenerateTarget, "wilcoxon: all differences are zero");
  const auto n = static_cast<Index>(diff.size());
  Vector mags(n);
  for (Index i = 0; i < n; ++i) mags(i) = -std::abs(diff[static_cast<size_t>(i)]);  // rank 1 = smallest
  const Vector r = average_ranks(mags);
  SignedRanks out;
  for (Index i = 0; i < n; ++i) {
    out.ranks.push_back(r(i));
    out.positive.push_back(diff[static_cast<size_t>(i)] > 0);
    if (diff[static_cast<size_t>(i)] > 0) out.w_plus += r(i);
  }
  std::vector<double> sorted = out.ranks;
  std::sort(sorted.begin(), sorted.end());
  for (size_t s = 0; s < sorted.size();) {
    size_t e = s;
    while (e < sorted.size() && sorted[e] == sorted[s]) ++e;
    const double t = static_cast<double>(e - s);
    out.tie_term += t * t * t - t;
    s = e;
  }
  return out;
}

double combine_tails(double upper, double lower, Sidedness sidedness) {
  switch (sidedness) {
    case Sidedness::Greater: return std::min(1.0, upper);
    case Sidedness::Less: return std::min(1.0, lower);
    case Sidedness::TwoSided: return std::min(1.0, 2.0 * std::min(upper, lower));
  }
  return 1.0;
}

WilcoxonResult approx(const SignedRanks& sr, Sidedness sidedness) {
  const double n = static_cast<double>(sr.ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - sr.tie_term / 48.0;
  WilcoxonResult out;
  out.statistic = sr.w_plus;
  out.n_effective = static_cast<Index>(sr.ranks.size());
  out.sidedness = sidedness;
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double sd = std::sqrt(var);
  const double upper = normal_sf((sr.w_plus - mean - 0.5) / sd);
  const double lower = normal_sf((mean - sr.w_plus - 0.5) / sd);
  out.p_value = combine_tails(upper, lower, sidedness);
  return out;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank_approx(const std::vector<double>& a, const std::vector<double>& b,
                                           Sidedness sidedness) {
  return approx(signed_ranks(a, b), sidedness);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b, Sidedness sidedness) {
  const SignedRanks sr = signed_ranks(a, b);
  if (sr.ranks.size() > 20) return approx(sr, sidedness);
  // Exact null: every sign pattern equally likely. Ranks are multiples of
  // 1/2, so count sums of doubled ranks.
  std::vector<int> doubled;
  int total = 0;
  for (double r : sr.ranks) {
    doubled.push_back(static_cast<int>(std::lround(2.0 * r)));
    total += doubled.back();
  }
  std::vector<double> count(static_cast<size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  int reach = 0;
  for (int r : doubled) {
    reach += r;
    for (int s = reach; s >= r; --s) count[static_cast<size_t>(s)] += count[static_cast<size_t>(s - r)];
  }
  const double patterns = std::ldexp(1.0, static_cast<int>(doubled.size()));
  const auto w2 = static_cast<int>(std::lround(2.0 * sr.w_plus));
  double upper = 0.0, lower = 0.0;
  for (int s = 0; s <= total; ++s) {
    if (s >= w2) upper += count[static_cast<size_t>(s)];
    if (s <= w2) lower += count[static_cast<size_t>(s)];
  }
  WilcoxonResult out;
  out.statistic = sr.w_plus;
  out.n_effective = static_cast<Index>(sr.ranks.size());
  out.sidedness = sidedness;
  out.exact = true;
  out.p_value = combine_tails(upper / patterns, lower / patterns, sidedness);
  return out;
}

WinTieLoss win_tie_loss(const std::vector<double>& a, const std::vector<double>& b, double tie_margin) {
  if (a.size() != b.size()) throw Error(ErrorCode::Dimension, "win_tie_loss: lengths differ");
  WinTieLoss out;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::abs(d) <= tie_margin + 1e-12) ++out.ties;
    else if (d > 0) ++out.wins;
    else ++out.losses;
  }
  return out;
}

}  // namespace softlearn
