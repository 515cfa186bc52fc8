#pragma once

#include <cstdint>
#include <span>

namespace escape {

struct StatsSummary {
  std::size_t n = 0;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int resamples = 10'000;
};

/// Sample median; +inf entries (censored runs) sort last and propagate.
double median_of(std::span<const double> samples);

/// Percentile bootstrap 95% CI of the median.
StatsSummary bootstrap_median_ci(std::span<const double> samples, int resamples = 10'000,
                                 std::uint64_t seed = 0);

/// Two-sided Wilcoxon signed-rank p-value. Zero differences are dropped; the
/// null distribution is enumerated exactly for n <= 20 and approximated by a
/// continuity-corrected normal above.
double wilcoxon_signed_rank(std::span<const double> paired_diffs);

/// Normal-approximation branch, exposed for cross-checking the exact branch.
double wilcoxon_normal_approx(std::span<const double> paired_diffs);

}  // namespace escape
