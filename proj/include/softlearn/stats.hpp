#pragma once

#include "softlearn/core.hpp"

#include <string>
#include <vector>

namespace softlearn {

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);
/// 1 - SS_res / SS_tot; constant truth raises a degenerate-target error.
double r_squared(const Eigen::Ref<const Vector>& predicted, const Eigen::Ref<const Vector>& truth);

/// Ranks per dataset (rows = datasets, columns = methods), rank 1 = best,
/// ties share the average rank.
struct RankTable {
  Matrix ranks;     // N x k
  Vector mean_rank; // k
};

/// `scores` is methods x datasets; higher is better unless lower_is_better.
RankTable rank_methods(const Matrix& scores, bool lower_is_better = false);

/// Average ranks of one score vector (rank 1 = largest).
Vector average_ranks(const Eigen::Ref<const Vector>& scores);

struct FriedmanResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

FriedmanResult friedman_test(const RankTable& ranks);
/// From mean ranks over N datasets.
FriedmanResult friedman_from_mean_ranks(const Eigen::Ref<const Vector>& mean_rank, Index n_datasets);

/// Two-tailed studentized-range quantile over sqrt(2), k = 2..20, alpha in {0.05, 0.10}.
double nemenyi_q(int k, double alpha);
double nemenyi_cd(int k, Index n_datasets, double alpha = 0.05);

enum class Sidedness { TwoSided, Greater, Less };
const char* to_string(Sidedness s);

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences a - b
  Index n_effective = 0;
  double p_value = 1.0;
  Sidedness sidedness = Sidedness::TwoSided;
  bool exact = false;
};

/// Zero differences are dropped. Exact null distribution for n_eff <= 20,
/// normal approximation with tie and continuity corrections otherwise.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    Sidedness sidedness = Sidedness::TwoSided);
/// Forces the normal approximation regardless of n.
WilcoxonResult wilcoxon_signed_rank_approx(const std::vector<double>& a, const std::vector<double>& b,
                                           Sidedness sidedness = Sidedness::TwoSided);

struct WinTieLoss {
  int wins = 0;
  int ties = 0;
  int losses = 0;
};

WinTieLoss win_tie_loss(const std::vector<double>& a, const std::vector<double>& b, double tie_margin = 0.001);

/// Upper tail of the chi-square distribution.
double chi2_sf(double x, double dof);
/// Standard normal upper tail.
double normal_sf(double z);

}  // namespace softlearn
