#include <cstdio>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "escape/baselines.hpp"
#include "escape/harness.hpp"
#include "escape/probe.hpp"

namespace {

constexpr int kExitLemmaFailure = 2;
constexpr int kExitConfig = 3;

int cmd_run(const std::string& exp, const std::string& config, const std::string& out,
            std::optional<std::uint64_t> seed_base, int jobs) {
  escape::ExperimentSpec spec = config.empty() ? escape::default_spec(exp)
                                               : escape::load_spec(config, exp);
  if (seed_base) {
    const std::size_t n = spec.seeds.size();
    spec.seeds.clear();
    for (std::size_t i = 0; i < n; ++i) spec.seeds.push_back(*seed_base + i);
  }
  spec.jobs = jobs;
  if (!out.empty()) spec.output_dir = out;
  escape::validate_spec(spec);
  if (spec.name == "lemma_checks") {
    const auto report = escape::run_lemma_checks(spec.seeds.front());
    std::cout << escape::format_report(report);
    return report.all_passed() ? 0 : kExitLemmaFailure;
  }
  const auto table = escape::run_experiment(spec);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& r : table.rows)
    std::cout << fmt::format("{:<40} {:<18} median={:.6g} [{:.6g}, {:.6g}] censored={}\n",
                             r.config, r.metric, r.summary.median, r.summary.ci_low,
                             r.summary.ci_high, r.censored);
  for (const auto& [k, v] : table.scalars) std::cout << fmt::format("{} = {:.6g}\n", k, v);
  return 0;
}

int cmd_single(const std::string& family, int dim, double eps, double delta,
               const std::string& method, std::uint64_t seed, const std::string& init,
               const std::string& out, bool early_exit) {
  const escape::Family fam = escape::parse_family(family);
  const escape::Problem p = escape::make_problem(fam, dim);
  escape::Rng start(escape::derive_seed(seed, 1));
  const escape::Vector x0 =
      escape::make_start(fam, escape::resolve_start(fam, init), p, eps, start);
  escape::PsdConfig cfg = escape::derive_params(p, p.suboptimality_at(x0), eps, delta);
  cfg.early_exit = early_exit;
  escape::Rng rng(seed);
  escape::RunTrace tr;
  switch (escape::parse_method(method)) {
    case escape::Method::GD:
      cfg.escapes_enabled = false;
      tr = escape::run_psd(p, cfg, x0, rng);
      break;
    case escape::Method::PSD: tr = escape::run_psd(p, cfg, x0, rng); break;
    case escape::Method::PSDProbe:
      tr = escape::run_psd_probe(p, cfg, escape::make_probe_params(eps, p.rho, delta, dim), x0,
                                 rng);
      break;
    case escape::Method::PGD: tr = escape::run_pgd(p, cfg, x0, rng); break;
  }
  std::cout << fmt::format(
      "status={} iterations={} grad_evals={} episodes={} f0={:.10g} f={:.10g} T={} r={:.6g}\n",
      escape::status_name(tr.terminal_status), tr.iterations, tr.grad_evals, tr.episodes.size(),
      tr.f_initial, tr.f_terminal, cfg.episode_length, cfg.r);
  const std::string file = out.empty() ? fmt::format("trace_{}.csv", seed) : out;
  escape::write_trace_csv(tr, file, false);
  std::cout << "trace written to " << file << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed saddle-escape descent experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment sweep");
  std::string exp;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed_base;
  int jobs = 1;
  run->add_option("--exp", exp, "dimension_scaling | convergence | success_rate | noise_robustness");
  run->add_option("--config", config, "key = value config file");
  run->add_option("--out", out, "output directory");
  run->add_option("--seed-base", seed_base, "first seed; seeds are consecutive");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* check = app.add_subcommand("check", "Run the lemma verification suite");
  std::uint64_t check_seed = 1;
  check->add_option("--seed", check_seed);

  auto* single = app.add_subcommand("single", "Run one method once and write its trace");
  std::string family = "quartic";
  int dim = 10;
  double eps = 1e-3;
  double delta = 0.1;
  std::string method = "psd";
  std::uint64_t seed = 1;
  std::string init = "standard";
  std::string trace_out;
  bool early_exit = false;
  single->add_option("--family", family);
  single->add_option("--dim", dim);
  single->add_option("--eps", eps);
  single->add_option("--delta", delta);
  single->add_option("--method", method, "gd | psd | psd_probe | pgd");
  single->add_option("--seed", seed);
  single->add_option("--init", init, "standard | saddle | origin | index1 | rosenbrock_saddle | classic | sphere");
  single->add_option("--out", trace_out, "trace CSV path");
  single->add_flag("--early-exit", early_exit);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (exp.empty() && config.empty()) throw escape::ConfigError("run needs --exp or --config");
      return cmd_run(exp, config, out, seed_base, jobs);
    }
    if (*check) {
      const auto report = escape::run_lemma_checks(check_seed);
      std::cout << escape::format_report(report);
      return report.all_passed() ? 0 : kExitLemmaFailure;
    }
    if (*single) return cmd_single(family, dim, eps, delta, method, seed, init, trace_out, early_exit);
  } catch (const escape::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitConfig;
  } catch (const escape::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
