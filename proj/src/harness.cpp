#include "escape/harness.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <thread>

#include <fmt/format.h>

#include "escape/baselines.hpp"
#include "escape/probe.hpp"

namespace fs = std::filesystem;

namespace escape {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kBootstrapStream = 0xB0075;
constexpr std::uint64_t kStartStream = 0x57A27;
constexpr std::uint64_t kMethodStream = 0x3E7;
constexpr std::uint64_t kNoiseStream = 0x5EED;

std::string num(double v) { return fmt::format("{:.17g}", v); }
std::string num(std::int64_t v) { return fmt::format("{}", v); }
std::string num(std::size_t v) { return fmt::format("{}", v); }
std::string num(int v) { return fmt::format("{}", v); }


/// Unperturbed version of a start law, when it is deterministic.
std::optional<Vector> reference_point(Family f, StartKind kind, const Problem& p) {
  if (kind == StartKind::Standard) {
    switch (f) {
      case Family::SeparableQuartic:
      case Family::CoupledQuartic: kind = StartKind::OriginSaddle; break;
      case Family::Rosenbrock: kind = StartKind::RosenbrockClassic; break;
      case Family::RandomQuadratic: return std::nullopt;
    }
  }
  switch (kind) {
    case StartKind::OriginSaddle: return Vector(Vector::Zero(p.dim));
    case StartKind::IndexOneSaddle: {
      Vector x = Vector::Constant(p.dim, 1.0 / std::sqrt(2.0));
      x[0] = 0.0;
      return x;
    }
    case StartKind::RosenbrockSaddle: return rosenbrock_saddle(p.dim);
    case StartKind::RosenbrockClassic: {
      Vector x = Vector::Ones(p.dim);
      x[0] = -1.2;
      return x;
    }
    default: return std::nullopt;
  }
}

std::string problem_key(Family f, int d) { return fmt::format("{}-d{}", family_name(f), d); }

std::string path_safe(std::string s) {
  for (char& c : s)
    if (c == '/' || c == '=' || c == ' ') c = '_';
  return s;
}

Vector draw_start(const ExperimentSpec& s, Family f, const Problem& p, std::uint64_t seed,
                  std::uint64_t stream) {
  Rng rng(derive_seed(seed, kStartStream + stream));
  return make_start(f, resolve_start(f, s.init), p, s.epsilon, rng);
}

PsdConfig run_config(const ExperimentSpec& s, const Problem& p, const Vector& x0,
                     std::int64_t budget) {
  PsdConfig c = derive_params(p, p.suboptimality_at(x0), s.epsilon, s.delta);
  c.early_exit = s.early_exit;
  c.grad_budget = budget;
  c.trace_stride = s.output_dir.empty() ? 0 : s.trace_stride;
  return c;
}

/// Independent check of a claimed SOSP: |grad f| <= eps and lambda_min of the
/// dense Hessian >= -sqrt(rho eps) (-sqrt(eps) when rho = 0).
bool verified_sosp(const Problem& p, const Vector& x, double eps) {
  if (!(p.gradient(x).norm() <= eps)) return false;
  Matrix h(p.dim, p.dim);
  for (int j = 0; j < p.dim; ++j) h.col(j) = p.hvp(x, Vector::Unit(p.dim, j));
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()),
                                                 Eigen::EigenvaluesOnly);
  const double curv = p.rho > 0.0 ? std::sqrt(p.rho * eps) : std::sqrt(eps);
  return es.eigenvalues()[0] >= -curv;
}

struct RunOutcome {
  RunTrace trace;
  std::string error;
  bool ok() const { return error.empty(); }
};

struct EpisodeRow {
  std::string config;
  std::uint64_t seed = 0;
  EpisodeRecord rec;
};

/// Accumulates rows and writes raw sample files as they are added.
class TableBuilder {
 public:
  TableBuilder(const ExperimentSpec& spec, std::string name, std::vector<std::string> extras)
      : spec_(spec) {
    table_.experiment = std::move(name);
    table_.extra_columns = std::move(extras);
  }

  ResultsRow& add(const std::string& config, const std::string& metric,
                  std::vector<double> samples, const std::vector<std::string>& ids,
                  std::vector<std::string> extras) {
    ResultsRow row;
    row.config = config;
    row.metric = metric;
    row.bootstrap_seed = derive_seed(kBootstrapStream, table_.rows.size());
    for (double v : samples)
      if (std::isinf(v)) ++row.censored;
    row.summary = bootstrap_median_ci(samples, spec_.resamples, row.bootstrap_seed);
    row.samples = std::move(samples);
    row.extras = std::move(extras);
    if (!spec_.output_dir.empty()) {
      row.raw_path = fmt::format("raw/{}__{}.csv", path_safe(config), metric);
      const fs::path file = spec_.output_dir / row.raw_path;
      fs::create_directories(file.parent_path());
      std::ofstream out(file);
      out << "sample_id,value\n";
      for (std::size_t i = 0; i < row.samples.size(); ++i)
        out << ids[i] << ',' << num(row.samples[i]) << '\n';
    }
    table_.rows.push_back(std::move(row));
    return table_.rows.back();
  }

  void scalar(const std::string& key, double v) { table_.scalars.emplace_back(key, v); }
  void warn(const std::string& w) { table_.warnings.push_back(w); }

  void episode(const std::string& config, std::uint64_t seed, const RunTrace& tr) {
    for (const auto& e : tr.episodes) episodes_.push_back({config, seed, e});
  }

  void trace(const std::string& config, std::uint64_t seed, const RunTrace& tr, bool stochastic) {
    if (spec_.output_dir.empty() || spec_.trace_stride <= 0) return;
    const fs::path dir = spec_.output_dir / path_safe(config);
    fs::create_directories(dir);
    write_trace_csv(tr, dir / fmt::format("trace_{}.csv", seed), stochastic);
  }

  void record_failures(const std::string& config, const std::vector<std::uint64_t>& seeds,
                       const std::vector<RunOutcome>& runs) {
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (!runs[i].ok()) warn(fmt::format("{} seed {}: {}", config, seeds[i], runs[i].error));
  }

  ResultsTable finish() {
    if (!spec_.output_dir.empty()) {
      fs::create_directories(spec_.output_dir);
      std::ofstream out(spec_.output_dir / "episodes.csv");
      out << "config,seed,episode_id,f_enter,f_exit,decrease,steps,success,probe_id\n";
      for (const auto& e : episodes_) {
        out << e.config << ',' << e.seed << ',' << e.rec.episode_id << ',' << num(e.rec.f_enter)
            << ',' << num(e.rec.f_exit) << ',' << num(e.rec.decrease) << ',' << e.rec.steps << ','
            << (e.rec.success ? 1 : 0) << ',' << e.rec.probe_id << '\n';
      }
    }
    return std::move(table_);
  }

 private:
  const ExperimentSpec& spec_;
  ResultsTable table_;
  std::vector<EpisodeRow> episodes_;
};

template <class Fn>
std::vector<RunOutcome> run_seeds(const ExperimentSpec& s, Fn&& fn) {
  std::vector<RunOutcome> out(s.seeds.size());
  parallel_for(s.seeds.size(), s.jobs, [&](std::size_t i) {
    try {
      out[i].trace = fn(s.seeds[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  return out;
}

std::vector<std::string> seed_ids(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> ids;
  for (auto s : seeds) ids.push_back(std::to_string(s));
  return ids;
}

double success_fraction(const std::vector<RunOutcome>& runs, std::size_t* total = nullptr) {
  std::size_t n = 0;
  std::size_t ok = 0;
  for (const auto& r : runs)
    for (const auto& e : r.trace.episodes) {
      ++n;
      ok += e.success ? 1 : 0;
    }
  if (total) *total = n;
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : static_cast<double>(ok) / n;
}

double sosp_fraction(const std::vector<RunOutcome>& runs) {
  std::size_t ok = 0;
  for (const auto& r : runs) ok += (r.ok() && r.trace.reached_sosp()) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(runs.size());
}

}  // namespace

StartKind resolve_start(Family f, const std::string& init) {
  if (init != "saddle") return parse_start(init);
  switch (f) {
    case Family::SeparableQuartic:
    case Family::CoupledQuartic: return StartKind::OriginSaddle;
    case Family::Rosenbrock: return StartKind::RosenbrockSaddle;
    case Family::RandomQuadratic: return StartKind::UnitSphere;
  }
  return StartKind::Standard;
}

double ResultsTable::scalar(const std::string& key) const {
  for (const auto& [k, v] : scalars)
    if (k == key) return v;
  return std::numeric_limits<double>::quiet_NaN();
}

const ResultsRow* ResultsTable::find(const std::string& config, const std::string& metric) const {
  for (const auto& r : rows)
    if (r.config == config && r.metric == metric) return &r;
  return nullptr;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::tuple<double, double, double> linear_fit(const std::vector<double>& x,
                                              const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "linear_fit needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "linear_fit needs distinct x values");
  const double b = sxy / sxx;
  const double a = my - b * mx;
  const double r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
  return {a, b, r2};
}

void write_trace_csv(const RunTrace& tr, const fs::path& file, bool stochastic) {
  std::ofstream out(file);
  out << "iter,phase,f,grad_norm,episode_id";
  if (stochastic) out << ",batch_size,trigger_threshold,triggered";
  out << '\n';
  for (const auto& s : tr.samples) {
    out << s.iter << ',' << phase_name(s.phase) << ',' << num(s.f) << ',' << num(s.grad_norm) << ','
        << s.episode_id;
    if (stochastic)
      out << ',' << s.batch_size << ',' << num(s.trigger_threshold) << ',' << (s.triggered ? 1 : 0);
    out << '\n';
  }
}

ResultsTable exp_dimension_scaling(const ExperimentSpec& s) {
  TableBuilder tb(s, "dimension_scaling",
                  {"d", "ln_d", "T", "episodes", "success_fraction", "sosp_fraction"});
  std::vector<double> ln_d;
  std::vector<double> big_t;
  std::vector<double> medians;
  for (std::size_t di = 0; di < s.dims.size(); ++di) {
    const int d = s.dims[di];
    const Problem p = make_problem(s.family, d, s.family_params);
    const std::string key = fmt::format("d={}", d);
    const auto runs = run_seeds(s, [&](std::uint64_t seed) {
      const Vector x0 = draw_start(s, s.family, p, seed, di);
      const PsdConfig cfg = run_config(s, p, x0, std::numeric_limits<std::int64_t>::max());
      Rng rng(derive_seed(seed, kMethodStream));
      return run_psd(p, cfg, x0, rng);
    });
    tb.record_failures(key, s.seeds, runs);

    std::int64_t t_len = 0;
    if (auto ref = reference_point(s.family, resolve_start(s.family, s.init), p)) {
      t_len = derive_params(p, p.suboptimality_at(*ref), s.epsilon, s.delta).episode_length;
    } else {
      const Vector x0 = draw_start(s, s.family, p, s.seeds.front(), di);
      t_len = derive_params(p, p.suboptimality_at(x0), s.epsilon, s.delta).episode_length;
    }

    std::vector<double> dec;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      tb.episode(key, s.seeds[i], runs[i].trace);
      tb.trace(key, s.seeds[i], runs[i].trace, false);
      for (const auto& e : runs[i].trace.episodes) {
        dec.push_back(e.decrease);
        ids.push_back(fmt::format("{}:{}", s.seeds[i], e.episode_id));
      }
    }
    ln_d.push_back(std::log(static_cast<double>(d)));
    big_t.push_back(static_cast<double>(t_len));
    if (dec.empty()) {
      tb.warn(key + ": no escape episodes recorded");
      continue;
    }
    std::size_t n_ep = 0;
    const double succ = success_fraction(runs, &n_ep);
    const auto& row =
        tb.add(key, "episode_decrease", std::move(dec), ids,
               {num(d), num(ln_d.back()), num(t_len), num(n_ep), num(succ), num(sosp_fraction(runs))});
    medians.push_back(row.summary.median);
  }

  if (s.dims.size() >= 2) {
    const auto [a, b, r2] = linear_fit(ln_d, big_t);
    tb.scalar("fit_intercept", a);
    tb.scalar("fit_slope", b);
    tb.scalar("fit_r2", r2);
  } else {
    tb.warn("single dimension: T versus ln d fit skipped");
  }
  if (medians.size() >= 2) {
    const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
    tb.scalar("decrease_spread", (*hi - *lo) / std::abs(*lo));
  }
  return tb.finish();
}

ResultsTable exp_convergence(const ExperimentSpec& s) {
  TableBuilder tb(s, "convergence",
                  {"problem", "method", "sosp_rate", "false_sosp", "median_T"});
  const double cap = static_cast<double>(s.iteration_cap);
  for (std::size_t pi = 0; pi < s.problems.size(); ++pi) {
    const ProblemRef ref = s.problems[pi];
    const Problem p = make_problem(ref.family, ref.dim, s.family_params);
    const std::string pkey = problem_key(ref.family, ref.dim);
    std::vector<double> psd_iters;
    std::vector<double> pgd_iters;
    for (Method m : s.methods) {
      if (m == Method::PSDProbe && p.rho <= 0.0) {
        tb.warn(pkey + ": PSD-Probe needs rho > 0, skipped");
        continue;
      }
      const std::string key = pkey + "/" + method_name(m);
      std::vector<double> big_t(s.seeds.size(), 0.0);
      const auto runs = run_seeds(s, [&](std::uint64_t seed) {
        const Vector x0 = draw_start(s, ref.family, p, seed, pi);
        PsdConfig cfg = run_config(s, p, x0, s.iteration_cap);
        Rng rng(derive_seed(seed, kMethodStream + static_cast<std::uint64_t>(m)));
        switch (m) {
          case Method::GD: cfg.escapes_enabled = false; return run_psd(p, cfg, x0, rng);
          case Method::PSD: return run_psd(p, cfg, x0, rng);
          case Method::PSDProbe:
            return run_psd_probe(p, cfg, make_probe_params(s.epsilon, p.rho, s.delta, p.dim), x0,
                                 rng);
          case Method::PGD: return run_pgd(p, cfg, x0, rng);
        }
        throw InvalidArgument("unknown method");
      });
      tb.record_failures(key, s.seeds, runs);
      std::vector<double> iters;
      std::size_t false_sosp = 0;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const RunTrace& tr = runs[i].trace;
        bool done = runs[i].ok() && tr.reached_sosp() && static_cast<double>(tr.iterations) <= cap;
        if (done && !verified_sosp(p, tr.terminal_point, s.epsilon)) {
          done = false;
          ++false_sosp;
        }
        iters.push_back(done ? static_cast<double>(tr.iterations) : kInf);
        tb.episode(key, s.seeds[i], tr);
        tb.trace(key, s.seeds[i], tr, false);
      }
      const Vector x_ref = draw_start(s, ref.family, p, s.seeds.front(), pi);
      const auto t_len = run_config(s, p, x_ref, s.iteration_cap).episode_length;
      if (m == Method::PSD) psd_iters = iters;
      if (m == Method::PGD) pgd_iters = iters;
      tb.add(key, "iterations", iters, seed_ids(s.seeds),
             {pkey, method_name(m), num(sosp_fraction(runs)), num(false_sosp), num(t_len)});
      if (false_sosp > 0)
        tb.warn(fmt::format("{}: {} runs stopped at a point that is not an SOSP", key, false_sosp));
    }
    if (!psd_iters.empty() && !pgd_iters.empty()) {
      std::vector<double> diffs;
      for (std::size_t i = 0; i < psd_iters.size(); ++i)
        diffs.push_back(std::min(psd_iters[i], cap) - std::min(pgd_iters[i], cap));
      double pval = std::numeric_limits<double>::quiet_NaN();
      try {
        pval = wilcoxon_signed_rank(diffs);
      } catch (const InvalidArgument& e) {
        tb.warn(pkey + ": Wilcoxon PSD vs PGD undefined (" + e.what() + ")");
      }
      tb.scalar("wilcoxon_p[" + pkey + "]", pval);
    }
  }
  return tb.finish();
}

ResultsTable exp_success_rate(const ExperimentSpec& s) {
  TableBuilder tb(s, "success_rate",
                  {"d", "ordinal", "episodes", "successes", "success_rate", "std_error", "theory",
                   "theory_plotted"});
  for (std::size_t di = 0; di < s.dims.size(); ++di) {
    const int d = s.dims[di];
    const Problem p = make_problem(s.family, d, s.family_params);
    const std::string key = fmt::format("d={}", d);
    const auto runs = run_seeds(s, [&](std::uint64_t seed) {
      const Vector x0 = draw_start(s, s.family, p, seed, di);
      const PsdConfig cfg = run_config(s, p, x0, std::numeric_limits<std::int64_t>::max());
      Rng rng(derive_seed(seed, kMethodStream));
      return run_psd(p, cfg, x0, rng);
    });
    tb.record_failures(key, s.seeds, runs);
    const double theory = 1.0 - 1.0 / (16.0 * d);
    // The published figure draws its theory line at 1 - 1/16.
    const double plotted = 1.0 - 1.0 / 16.0;

    std::vector<std::vector<double>> by_ord;
    std::vector<std::vector<std::string>> ids;
    std::vector<double> all;
    std::vector<std::string> all_ids;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      tb.episode(key, s.seeds[i], runs[i].trace);
      tb.trace(key, s.seeds[i], runs[i].trace, false);
      for (const auto& e : runs[i].trace.episodes) {
        const auto k = static_cast<std::size_t>(e.episode_id);
        if (by_ord.size() <= k) {
          by_ord.resize(k + 1);
          ids.resize(k + 1);
        }
        const std::string id = fmt::format("{}:{}", s.seeds[i], e.episode_id);
        by_ord[k].push_back(e.decrease);
        ids[k].push_back(id);
        all.push_back(e.decrease);
        all_ids.push_back(id);
      }
    }
    if (all.empty()) {
      tb.warn(key + ": no escape episodes; nothing to measure");
      continue;
    }
    const double target = s.epsilon * s.epsilon / (128.0 * p.ell);
    auto emit = [&](const std::string& ord, std::vector<double> dec,
                    const std::vector<std::string>& id) {
      std::size_t ok = 0;
      for (double v : dec) ok += v >= target ? 1 : 0;
      const double n = static_cast<double>(dec.size());
      const double rate = static_cast<double>(ok) / n;
      const double se = std::sqrt(rate * (1.0 - rate) / n);
      const std::size_t count = dec.size();
      tb.add(key + "/ordinal=" + ord, "episode_decrease", std::move(dec), id,
             {num(d), ord, num(count), num(ok), num(rate), num(se), num(theory), num(plotted)});
      return rate;
    };
    for (std::size_t k = 0; k < by_ord.size(); ++k)
      if (!by_ord[k].empty()) emit(std::to_string(k), by_ord[k], ids[k]);
    const double rate = emit("all", all, all_ids);
    if (all.size() < 100) tb.warn(fmt::format("{}: only {} episodes collected", key, all.size()));
    tb.scalar("success_rate[" + key + "]", rate);
    tb.scalar("theory[" + key + "]", theory);
  }
  return tb.finish();
}

ResultsTable exp_noise_robustness(const ExperimentSpec& s) {
  TableBuilder tb(s, "noise_robustness",
                  {"sigma_ratio", "batch", "trigger_threshold", "success_rate", "episodes",
                   "sosp_rate"});
  const double eps2 = s.epsilon * s.epsilon;
  for (std::size_t di = 0; di < s.dims.size(); ++di) {
    const int d = s.dims[di];
    const Problem p = make_problem(s.family, d, s.family_params);
    for (double ratio : s.sigma_ratios) {
      const double sigma2 = ratio * eps2;
      const int batch = batch_size(sigma2, s.epsilon, s.delta_fp);
      const std::string key = fmt::format("d={}/sigma_ratio={}", d, num(ratio));
      const auto runs = run_seeds(s, [&](std::uint64_t seed) {
        const Vector x0 = draw_start(s, s.family, p, seed, di);
        const PsdConfig base = run_config(s, p, x0, s.iteration_cap * batch);
        const PsgdConfig cfg = make_psgd_config(base, sigma2, s.delta_fp);
        NoisyGradModel model{p, sigma2, derive_seed(seed, kNoiseStream), 0};
        Rng rng(derive_seed(seed, kMethodStream));
        return run_psgd(model, cfg, x0, rng);
      });
      tb.record_failures(key, s.seeds, runs);
      std::vector<double> grads;
      std::vector<double> iters;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const RunTrace& tr = runs[i].trace;
        const bool done =
            runs[i].ok() && tr.reached_sosp() && verified_sosp(p, tr.terminal_point, s.epsilon);
        grads.push_back(done ? static_cast<double>(tr.grad_evals) : kInf);
        iters.push_back(done ? static_cast<double>(tr.iterations) : kInf);
        tb.episode(key, s.seeds[i], tr);
        tb.trace(key, s.seeds[i], tr, true);
      }
      std::size_t n_ep = 0;
      const double succ = success_fraction(runs, &n_ep);
      const std::vector<std::string> extras = {
          num(ratio), num(batch), num(trigger_threshold(sigma2, s.epsilon, batch)), num(succ),
          num(n_ep), num(sosp_fraction(runs))};
      tb.add(key, "grad_evals", grads, seed_ids(s.seeds), extras);
      tb.add(key, "iterations", iters, seed_ids(s.seeds), extras);
      tb.scalar(fmt::format("batch[{}]", key), batch);
      tb.scalar(fmt::format("success_rate[{}]", key), succ);
    }
  }
  return tb.finish();
}

ResultsTable run_experiment(const ExperimentSpec& s) {
  validate_spec(s);
  if (!s.output_dir.empty()) fs::create_directories(s.output_dir);
  ResultsTable t;
  if (s.name == "dimension_scaling") {
    t = exp_dimension_scaling(s);
  } else if (s.name == "convergence") {
    t = exp_convergence(s);
  } else if (s.name == "success_rate") {
    t = exp_success_rate(s);
  } else if (s.name == "noise_robustness") {
    t = exp_noise_robustness(s);
  } else {
    throw ConfigError("run_experiment: '" + s.name + "' is not a sweep experiment");
  }
  if (!s.output_dir.empty()) write_results(t, s.output_dir);
  return t;
}

void write_results(const ResultsTable& t, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "results.csv");
    out << "config,metric,n,censored,median,ci_low,ci_high,resamples,bootstrap_seed,raw_path";
    for (const auto& c : t.extra_columns) out << ',' << c;
    out << '\n';
    for (const auto& r : t.rows) {
      out << r.config << ',' << r.metric << ',' << r.summary.n << ',' << r.censored << ','
          << num(r.summary.median) << ',' << num(r.summary.ci_low) << ','
          << num(r.summary.ci_high) << ',' << r.summary.resamples << ',' << r.bootstrap_seed << ','
          << r.raw_path;
      for (const auto& e : r.extras) out << ',' << e;
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "scalars.csv");
    out << "key,value\n";
    for (const auto& [k, v] : t.scalars) out << k << ',' << num(v) << '\n';
  }
  std::ofstream out(dir / "summary.txt");
  out << "experiment: " << t.experiment << "\n\n";
  out << fmt::format("{:<40} {:<18} {:>5} {:>8} {:>14} {:>14} {:>14}\n", "config", "metric", "n",
                     "censored", "median", "ci_low", "ci_high");
  const auto cell = [](double v) { return std::isinf(v) ? std::string(">cap") : fmt::format("{:.6g}", v); };
  for (const auto& r : t.rows)
    out << fmt::format("{:<40} {:<18} {:>5} {:>8} {:>14} {:>14} {:>14}\n", r.config, r.metric,
                       r.summary.n, r.censored, cell(r.summary.median), cell(r.summary.ci_low),
                       cell(r.summary.ci_high));
  if (!t.scalars.empty()) {
    out << '\n';
    for (const auto& [k, v] : t.scalars) out << fmt::format("{} = {:.6g}\n", k, v);
  }
  if (!t.warnings.empty()) {
    out << "\nwarnings:\n";
    for (const auto& w : t.warnings) out << "  " << w << '\n';
  }
}

}  // namespace escape
