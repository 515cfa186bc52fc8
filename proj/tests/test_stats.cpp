#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "escape/common.hpp"
#include "escape/stats.hpp"

using namespace escape;

TEST_CASE("median") {
  const std::vector<double> odd = {3, 1, 2};
  const std::vector<double> even = {4, 1, 3, 2};
  CHECK(median_of(odd) == 2.0);
  CHECK(median_of(even) == 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> cens = {1, inf, inf};
  CHECK(std::isinf(median_of(cens)));
  const std::vector<double> half = {1, 2, inf, inf};
  CHECK(std::isinf(median_of(half)));
}

TEST_CASE("bootstrap degenerate and symmetric samples") {
  const std::vector<double> same(25, 7.5);
  const StatsSummary s = bootstrap_median_ci(same, 1000, 1);
  CHECK(s.median == 7.5);
  CHECK(s.ci_low == 7.5);
  CHECK(s.ci_high == 7.5);

  std::vector<double> seq;
  for (int i = 1; i <= 101; ++i) seq.push_back(i);
  const StatsSummary t = bootstrap_median_ci(seq, 10'000, 2);
  CHECK(t.median == 51.0);
  CHECK(t.ci_low <= 51.0);
  CHECK(t.ci_high >= 51.0);
  CHECK(t.resamples == 10'000);
  CHECK(t.n == 101);

  CHECK_THROWS_AS(bootstrap_median_ci(std::vector<double>{}, 100, 1), InvalidArgument);
}

TEST_CASE("bootstrap is deterministic") {
  std::vector<double> xs = {5, 1, 9, 3, 3, 8, 2};
  const StatsSummary a = bootstrap_median_ci(xs, 500, 42);
  const StatsSummary b = bootstrap_median_ci(xs, 500, 42);
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_high == b.ci_high);
}

TEST_CASE("bootstrap width matches the asymptotic median CI on uniforms") {
  Rng rng(7);
  std::uniform_real_distribution<double> u;
  std::vector<double> xs(1000);
  for (auto& x : xs) x = u(rng);
  const StatsSummary s = bootstrap_median_ci(xs, 10'000, 3);
  const double analytic = 2.0 * 1.96 / (2.0 * std::sqrt(1000.0));
  CHECK(s.ci_high - s.ci_low == doctest::Approx(analytic).epsilon(0.3));
  CHECK(s.ci_low <= s.median);
  CHECK(s.median <= s.ci_high);
}

TEST_CASE("bootstrap coverage over synthetic trials") {
  Rng rng(11);
  std::exponential_distribution<double> e(1.0);
  const double true_median = std::log(2.0);
  int covered = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> xs(60);
    for (auto& x : xs) x = e(rng);
    const StatsSummary s = bootstrap_median_ci(xs, 1000, rng());
    covered += (s.ci_low <= true_median && true_median <= s.ci_high) ? 1 : 0;
  }
  const double cov = covered / 500.0;
  CHECK(cov >= 0.90);
  CHECK(cov <= 0.99);
}

TEST_CASE("Wilcoxon exact examples") {
  std::vector<double> pos10;
  for (int i = 1; i <= 10; ++i) pos10.push_back(i * 0.7);
  CHECK(wilcoxon_signed_rank(pos10) == doctest::Approx(2.0 / 1024.0).epsilon(1e-12));

  const std::vector<double> pos5 = {1, 2, 3, 4, 5};
  CHECK(wilcoxon_signed_rank(pos5) == doctest::Approx(0.0625).epsilon(1e-12));

  const std::vector<double> anti = {-1, 1, -2, 2, -3, 3, -4, 4};
  CHECK(wilcoxon_signed_rank(anti) == doctest::Approx(1.0));
}

TEST_CASE("Wilcoxon input handling") {
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{0, 0, 0, 0, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 0, 0, 3, 4}), InvalidArgument);
  // Zeros are dropped: five non-zero positives remain.
  const std::vector<double> with_zeros = {0, 1, 2, 0, 3, 4, 5};
  CHECK(wilcoxon_signed_rank(with_zeros) == doctest::Approx(0.0625));
  // Ties among magnitudes are handled by average ranks.
  const std::vector<double> ties = {1, 1, 1, -1, 2, 2, 3};
  const double p = wilcoxon_signed_rank(ties);
  CHECK(p > 0.0);
  CHECK(p <= 1.0);
}

TEST_CASE("Wilcoxon exact and normal branches agree at n = 20") {
  Rng rng(5);
  std::normal_distribution<double> n(0.3, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> d(20);
    for (auto& x : d) x = n(rng);
    CHECK(std::abs(wilcoxon_signed_rank(d) - wilcoxon_normal_approx(d)) <= 0.02);
  }
}

TEST_CASE("Wilcoxon large samples use the normal approximation") {
  std::vector<double> d;
  for (int i = 1; i <= 50; ++i) d.push_back(-i);
  CHECK(wilcoxon_signed_rank(d) < 1e-8);
  CHECK(wilcoxon_signed_rank(d) == wilcoxon_normal_approx(d));
}
