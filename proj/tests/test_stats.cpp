#include "softlearn/stats.hpp"
#include "softlearn/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace softlearn;

namespace {

/// Exact one-sided p of W+ by enumerating every sign assignment.
double enumerate_upper_p(const std::vector<double>& ranks, double observed) {
  const size_t n = ranks.size();
  size_t hits = 0;
  for (size_t mask = 0; mask < (size_t{1} << n); ++mask) {
    double w = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) w += ranks[i];
    }
    hits += w >= observed - 1e-9 ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(size_t{1} << n);
}

}  // namespace

TEST_CASE("accuracy and R squared") {
  CHECK(accuracy({0, 1, 1}, {0, 1, 0}) == doctest::Approx(2.0 / 3.0));
  CHECK(accuracy({2, 1}, {2, 1}) == 1.0);
  const Vector y{{1.0, 2.0, 4.0}};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(Vector::Constant(3, y.mean()), y) == doctest::Approx(0.0));
  CHECK_THROWS_AS(r_squared(y, Vector::Constant(3, 1.0)), Error);
  CHECK_THROWS_AS(accuracy({0}, {0, 1}), Error);
}

TEST_CASE("rank examples") {
  CHECK(average_ranks(Vector{{3, 2, 1}}) == Vector{{1, 2, 3}});
  CHECK(average_ranks(Vector{{2, 2, 1}}) == Vector{{1.5, 1.5, 3}});
  CHECK(average_ranks(Vector::Constant(4, 0.7)) == Vector::Constant(4, 2.5));
  const auto lower = rank_methods(Matrix{{1.0}, {2.0}}, true);
  CHECK(lower.ranks(0, 0) == 1.0);
}

TEST_CASE("rank sums are conserved and ranks ignore monotone rescaling") {
  Rng rng(3);
  Matrix scores(6, 9);
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 9; ++j) scores(i, j) = std::round(rng.uniform() * 5.0) / 5.0;
  }
  const auto table = rank_methods(scores);
  for (Index d = 0; d < 9; ++d) CHECK(table.ranks.row(d).sum() == 21.0);
  const Matrix warped = (scores.array() * 3.0).exp().matrix();
  const auto again = rank_methods(warped);
  CHECK(again.ranks == table.ranks);
  CHECK(friedman_test(again).statistic == friedman_test(table).statistic);
}

TEST_CASE("Friedman statistic") {
  RankTable ties;
  ties.ranks = Matrix::Constant(5, 4, 2.5);
  ties.mean_rank = Vector::Constant(4, 2.5);
  CHECK(friedman_test(ties).statistic == 0.0);
  CHECK(friedman_test(ties).p_value == doctest::Approx(1.0));

  // k = 3 methods, N = 4 datasets.
  Matrix r(4, 3);
  r << 1, 2, 3, 1, 3, 2, 2, 1, 3, 1, 2, 3;
  const auto table = rank_methods(-r.transpose());
  // Direct evaluation: 12 / (N k (k+1)) sum R_j^2 - 3 N (k+1) with rank sums R = (5, 8, 11).
  const double direct = 12.0 / (4 * 3 * 4) * (25 + 64 + 121) - 3 * 4 * 4;
  CHECK(direct == doctest::Approx(4.5));
  const auto f = friedman_test(table);
  CHECK(f.statistic == doctest::Approx(direct).epsilon(1e-12));
  CHECK(f.dof == 2.0);
  CHECK(f.p_value == doctest::Approx(std::exp(-4.5 / 2.0)).epsilon(1e-9));
  RankTable two;
  two.ranks = Matrix::Constant(3, 2, 1.5);
  two.mean_rank = Vector::Constant(2, 1.5);
  CHECK_THROWS_AS(friedman_test(two), Error);
}

TEST_CASE("Friedman statistic from published mean ranks") {
  const Vector ranks{{3.12, 3.82, 4.65, 5.15, 5.26, 5.64, 6.31, 6.31, 6.81, 7.93}};
  const auto f = friedman_from_mean_ranks(ranks, 37);
  CHECK(std::abs(f.statistic - 75.76) <= 2.0);
  CHECK(f.dof == 9.0);
  CHECK(f.p_value < 1e-10);
}

TEST_CASE("chi-square and normal tails") {
  CHECK(chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi2_sf(2.0 * 3.0, 2) == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
  CHECK(chi2_sf(0.0, 4) == 1.0);
  CHECK(normal_sf(0.0) == doctest::Approx(0.5));
  CHECK(normal_sf(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
}

TEST_CASE("Nemenyi critical difference") {
  CHECK(std::abs(nemenyi_cd(10, 37) - 2.23) <= 0.01);
  const double q2 = nemenyi_q(2, 0.05);
  CHECK(q2 == doctest::Approx(1.960).epsilon(1e-3));
  CHECK(nemenyi_cd(2, 9) == doctest::Approx(q2 * std::sqrt(2.0 * 3.0 / (6.0 * 9.0))).epsilon(1e-12));
  CHECK(nemenyi_cd(5, 40) == doctest::Approx(0.5 * nemenyi_cd(5, 10)).epsilon(1e-12));
  CHECK_THROWS_AS(nemenyi_cd(25, 10), Error);
}

TEST_CASE("Wilcoxon exact distribution") {
  const std::vector<double> a{1.5, 2.5, 3.5, 4.5, 5.5}, b{1, 2, 3, 4, 5};
  const auto one = wilcoxon_signed_rank(a, b, Sidedness::Greater);
  CHECK(one.exact);
  CHECK(one.p_value == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK(one.statistic == 15.0);
  const auto swapped = wilcoxon_signed_rank(b, a, Sidedness::Greater);
  CHECK(swapped.statistic == 0.0);
  CHECK(wilcoxon_signed_rank(b, a, Sidedness::Less).p_value == doctest::Approx(1.0 / 32.0));

  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const size_t n = 4 + rng.below(8);
    std::vector<double> x(n), y(n, 0.0);
    for (auto& v : x) v = std::round(rng.normal() * 4.0) / 4.0 + 0.01 * (rng.uniform() > 0.5);
    const auto r = wilcoxon_signed_rank(x, y, Sidedness::Greater);
    // Oracle: average ranks of |x| over nonzero entries, then full enumeration.
    std::vector<double> nz;
    for (double v : x) {
      if (v != 0.0) nz.push_back(v);
    }
    Vector mags(static_cast<Index>(nz.size()));
    for (size_t i = 0; i < nz.size(); ++i) mags(static_cast<Index>(i)) = -std::abs(nz[i]);
    const Vector ranks = average_ranks(mags);
    std::vector<double> rank_list(ranks.data(), ranks.data() + ranks.size());
    double w = 0.0;
    for (size_t i = 0; i < nz.size(); ++i) w += nz[i] > 0 ? rank_list[i] : 0.0;
    CHECK(r.n_effective == static_cast<Index>(nz.size()));
    CHECK(r.statistic == doctest::Approx(w));
    CHECK(r.p_value == doctest::Approx(enumerate_upper_p(rank_list, w)).epsilon(1e-12));
  }
}

TEST_CASE("Wilcoxon antisymmetry and exact-approximate agreement") {
  Rng rng(19);
  for (int t = 0; t < 30; ++t) {
    const size_t n = 15 + rng.below(6);
    std::vector<double> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal() + 0.3;
    }
    const auto ab = wilcoxon_signed_rank(a, b);
    const auto ba = wilcoxon_signed_rank(b, a);
    const double total = static_cast<double>(n * (n + 1)) / 2.0;
    CHECK(ab.statistic + ba.statistic == doctest::Approx(total));
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
    // The continuity-corrected normal tail is off by up to about 0.011 at n = 15.
    CHECK(std::abs(ab.p_value - wilcoxon_signed_rank_approx(a, b).p_value) <= 0.015);
  }
  CHECK_THROWS_AS(wilcoxon_signed_rank({1, 2, 3}, {1, 2, 3}), Error);
}

TEST_CASE("win-tie-loss") {
  const std::vector<double> a{0.5, 0.6, 0.7, 0.8};
  const auto same = win_tie_loss(a, a);
  CHECK((same.wins == 0 && same.ties == 4 && same.losses == 0));
  std::vector<double> up = a;
  for (auto& v : up) v += 0.01;
  const auto better = win_tie_loss(up, a, 0.001);
  CHECK((better.wins == 4 && better.ties == 0 && better.losses == 0));
  const auto strict = win_tie_loss({0.1, 0.2, 0.3}, {0.2, 0.2 + 1e-9, 0.1}, 0.0);
  CHECK(strict.ties == 0);
  CHECK(strict.wins + strict.ties + strict.losses == 3);
}
