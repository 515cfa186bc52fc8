#include "escape/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "escape/common.hpp"

namespace escape {

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  if (std::isinf(hi)) return hi;
  return 0.5 * (lo + hi);
}

struct SignedRanks {
  std::vector<bool> positive;
  // Doubled average ranks, always integral.
  std::vector<int> rank2;
  double tie_term = 0.0;
};

SignedRanks signed_ranks(std::span<const double> diffs) {
  SignedRanks sr;
  std::vector<std::pair<double, bool>> nz;
  for (double d : diffs) {
    require(std::isfinite(d), "wilcoxon: differences must be finite");
    if (d != 0.0) nz.emplace_back(std::abs(d), d > 0.0);
  }
  require(!nz.empty(), "wilcoxon: all differences are zero");
  require(nz.size() >= 5, "wilcoxon: need at least 5 non-zero differences");
  std::sort(nz.begin(), nz.end());
  const std::size_t n = nz.size();
  sr.rank2.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && nz[j + 1].first == nz[i].first) ++j;
    // Ranks i+1..j+1 averaged, doubled.
    const int r2 = static_cast<int>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) sr.rank2[k] = r2;
    const double t = static_cast<double>(j - i + 1);
    sr.tie_term += t * t * t - t;
    i = j + 1;
  }
  for (const auto& e : nz) sr.positive.push_back(e.second);
  return sr;
}

double normal_p(const SignedRanks& sr) {
  const double n = static_cast<double>(sr.rank2.size());
  double w = 0.0;
  for (std::size_t i = 0; i < sr.rank2.size(); ++i)
    if (sr.positive[i]) w += 0.5 * sr.rank2[i];
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - sr.tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double exact_p(const SignedRanks& sr) {
  int total = 0;
  for (int r : sr.rank2) total += r;
  // counts[s] = number of sign assignments with doubled positive rank sum s.
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  int reach = 0;
  for (int r : sr.rank2) {
    for (int s = reach; s >= 0; --s)
      counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    reach += r;
  }
  int w2 = 0;
  for (std::size_t i = 0; i < sr.rank2.size(); ++i)
    if (sr.positive[i]) w2 += sr.rank2[i];
  const double all = std::ldexp(1.0, static_cast<int>(sr.rank2.size()));
  double le = 0.0;
  double ge = 0.0;
  for (int s = 0; s <= total; ++s) {
    if (s <= w2) le += counts[static_cast<std::size_t>(s)];
    if (s >= w2) ge += counts[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / all);
}

}  // namespace

double median_of(std::span<const double> samples) {
  require(!samples.empty(), "median of an empty sample");
  std::vector<double> v(samples.begin(), samples.end());
  return median_inplace(v);
}

StatsSummary bootstrap_median_ci(std::span<const double> samples, int resamples,
                                 std::uint64_t seed) {
  require(!samples.empty(), "bootstrap: empty sample list");
  require(resamples >= 1, "bootstrap: resamples must be >= 1");
  for (double s : samples) require(!std::isnan(s), "bootstrap: NaN sample");

  StatsSummary out;
  out.n = samples.size();
  out.resamples = resamples;
  out.median = median_of(samples);

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::vector<double> buf(samples.size());
  for (auto& st : stats) {
    for (auto& b : buf) b = samples[pick(rng)];
    st = median_inplace(buf);
  }
  std::sort(stats.begin(), stats.end());
  const double last = static_cast<double>(resamples - 1);
  out.ci_low = stats[static_cast<std::size_t>(std::floor(0.025 * last))];
  out.ci_high = stats[static_cast<std::size_t>(std::ceil(0.975 * last))];
  out.ci_low = std::min(out.ci_low, out.median);
  out.ci_high = std::max(out.ci_high, out.median);
  return out;
}

double wilcoxon_signed_rank(std::span<const double> paired_diffs) {
  const SignedRanks sr = signed_ranks(paired_diffs);
  return sr.rank2.size() <= 20 ? exact_p(sr) : normal_p(sr);
}

double wilcoxon_normal_approx(std::span<const double> paired_diffs) {
  return normal_p(signed_ranks(paired_diffs));
}

}  // namespace escape
