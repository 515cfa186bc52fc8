#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "escape/oracle.hpp"
#include "escape/psd.hpp"
#include "escape/psgd.hpp"
#include "escape/stats.hpp"

namespace escape {

/// Raised for malformed experiment configuration (CLI exit code 3).
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class Method { GD, PSD, PSDProbe, PGD };

Method parse_method(const std::string& name);
std::string method_name(Method m);

/// parse_start plus "saddle": the family's own saddle (origin, interior
/// Rosenbrock saddle, unit sphere for quadratics).
StartKind resolve_start(Family f, const std::string& init);

struct ProblemRef {
  Family family = Family::SeparableQuartic;
  int dim = 10;
};

struct ExperimentSpec {
  /// dimension_scaling, convergence, success_rate, noise_robustness or lemma_checks.
  std::string name;
  Family family = Family::SeparableQuartic;
  FamilyParams family_params;
  std::vector<int> dims;
  /// Convergence only; defaults to family x dims when empty.
  std::vector<ProblemRef> problems;
  double epsilon = 1e-3;
  double delta = 0.1;
  std::vector<std::uint64_t> seeds;
  /// Start law: "saddle" (family saddle) or any `parse_start` name.
  std::string init = "standard";
  bool early_exit = false;
  /// Runs that reach this many iterations without an SOSP are censored.
  std::int64_t iteration_cap = 50'000;
  std::vector<Method> methods;
  std::vector<double> sigma_ratios;
  double delta_fp = 0.0;
  int resamples = 10'000;
  int trace_stride = 100;
  int jobs = 1;
  std::filesystem::path output_dir;
};

/// Protocol defaults for an experiment name.
ExperimentSpec default_spec(const std::string& name);

/// Parses flat `key = value` text ('#' starts a comment) over the defaults of
/// the experiment named by the `exp` key, or `name` when the text has none.
ExperimentSpec parse_spec(const std::string& text, const std::string& name = {});
ExperimentSpec load_spec(const std::filesystem::path& file, const std::string& name = {});

/// Checks the invariants every experiment relies on; throws ConfigError.
void validate_spec(const ExperimentSpec& spec);

struct ResultsRow {
  std::string config;
  std::string metric;
  StatsSummary summary;
  std::size_t censored = 0;
  std::uint64_t bootstrap_seed = 0;
  /// Raw samples in seed order; +inf marks a censored run.
  std::vector<double> samples;
  std::string raw_path;
  /// Aligned with ResultsTable::extra_columns.
  std::vector<std::string> extras;
};

struct ResultsTable {
  std::string experiment;
  std::vector<std::string> extra_columns;
  std::vector<ResultsRow> rows;
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<std::string> warnings;

  [[nodiscard]] double scalar(const std::string& key) const;
  [[nodiscard]] const ResultsRow* find(const std::string& config, const std::string& metric) const;
};

ResultsTable exp_dimension_scaling(const ExperimentSpec& spec);
ResultsTable exp_convergence(const ExperimentSpec& spec);
ResultsTable exp_success_rate(const ExperimentSpec& spec);
ResultsTable exp_noise_robustness(const ExperimentSpec& spec);

/// Dispatches on spec.name and writes results.csv and summary.txt when
/// spec.output_dir is set.
ResultsTable run_experiment(const ExperimentSpec& spec);

void write_results(const ResultsTable& table, const std::filesystem::path& dir);
void write_trace_csv(const RunTrace& trace, const std::filesystem::path& file, bool stochastic);

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Distance to the violated side of the bound; >= 0 when the check passes.
  double margin = 0.0;
  std::string detail;
};

struct LemmaReport {
  std::vector<CheckResult> checks;
  [[nodiscard]] bool all_passed() const;
};

/// Numerical verification of the psd, probe, eigs and psgd properties.
LemmaReport run_lemma_checks(std::uint64_t seed = 1);
std::string format_report(const LemmaReport& report);

/// Runs fn(i) for i in [0, n) on `jobs` threads. Results keep index order.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Least-squares fit y = a + b x; returns {a, b, R^2}.
std::tuple<double, double, double> linear_fit(const std::vector<double>& x,
                                              const std::vector<double>& y);

}  // namespace escape
