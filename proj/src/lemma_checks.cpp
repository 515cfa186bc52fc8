#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "escape/harness.hpp"
#include "escape/probe.hpp"

namespace escape {

namespace {

constexpr double kEps = 1e-3;
constexpr double kDelta = 0.1;

CheckResult result(std::string name, bool ok, double margin, std::string detail) {
  return CheckResult{std::move(name), ok, margin, std::move(detail)};
}

Vector uniform_box(int d, double half, Rng& rng) {
  std::uniform_real_distribution<double> u(-half, half);
  Vector x(d);
  for (int i = 0; i < d; ++i) x[i] = u(rng);
  return x;
}

Vector linspace(int n, double lo, double hi) {
  if (n == 1) return Vector::Constant(1, lo);
  return Vector::LinSpaced(n, lo, hi);
}

struct DescentStats {
  std::int64_t steps = 0;
  double margin = std::numeric_limits<double>::infinity();
};

struct LemmaRun {
  RunTrace trace;
  PsdConfig cfg;
};

/// Runs used by the descent, descent-count and budget checks.
std::vector<LemmaRun> descent_runs(std::uint64_t seed, DescentStats& st) {
  std::vector<LemmaRun> out;
  const auto observe = [&st](double ell) {
    return [&st, ell](double f, double g2, double f_next) {
      const double bound = f - 3.0 / (8.0 * ell) * g2 + 1e-12 * (1.0 + std::abs(f));
      st.margin = std::min(st.margin, bound - f_next);
      ++st.steps;
    };
  };
  struct Case {
    Problem p;
    StartKind start;
    Family family;
  };
  std::vector<Case> cases;
  cases.push_back({make_separable_quartic(10), StartKind::UnitSphere, Family::SeparableQuartic});
  cases.push_back({make_coupled_quartic(10, 0.1), StartKind::UnitSphere, Family::CoupledQuartic});
  cases.push_back({make_rosenbrock(10), StartKind::RosenbrockClassic, Family::Rosenbrock});
  cases.push_back({make_random_quadratic(20, linspace(20, 1.0, 100.0), seed),
                   StartKind::UnitSphere, Family::RandomQuadratic});
  for (std::size_t c = 0; c < cases.size(); ++c) {
    for (std::uint64_t k = 0; k < 4; ++k) {
      const Problem& p = cases[c].p;
      Rng rng(derive_seed(seed, 100 * c + k));
      Vector x0 = make_start(cases[c].family, cases[c].start, p, kEps, rng);
      if (cases[c].start == StartKind::UnitSphere && p.rho > 0.0) x0 *= 1.2;
      PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), kEps, kDelta);
      cfg.early_exit = true;
      cfg.grad_budget = 3000;
      cfg.trace_stride = 0;
      RunHooks hooks;
      hooks.on_descent = observe(p.ell);
      out.push_back({run_psd(p, cfg, x0, rng, hooks), cfg});
    }
  }
  return out;
}

CheckResult check_descent_tight(std::uint64_t seed) {
  const int d = 10;
  const Problem p = make_random_quadratic(d, Vector::Ones(d), seed);
  Rng rng(derive_seed(seed, 7));
  const Vector x0 = 3.0 * sample_sphere(d, rng);
  PsdConfig cfg = derive_params(p, p.value(x0), kEps, kDelta);
  cfg.trace_stride = 0;
  double worst = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  std::int64_t n = 0;
  RunHooks hooks;
  hooks.on_descent = [&](double f, double g2, double f_next) {
    const double gap = std::abs(f_next - (f - 3.0 / 8.0 * g2));
    worst = std::max(worst, gap);
    margin = std::min(margin, 1e-12 * (1.0 + std::abs(f)) - gap);
    ++n;
  };
  run_psd(p, cfg, x0, rng, hooks);
  return result("descent_tight_quadratic", n > 0 && margin >= 0.0, margin,
                fmt::format("{} steps on 1/2|x|^2, max |f+ - bound| = {:.3g}", n, worst));
}

std::vector<CheckResult> check_remainder(std::uint64_t seed) {
  std::vector<Problem> probs = {make_separable_quartic(10), make_coupled_quartic(10, 0.1),
                                make_rosenbrock(10)};
  std::vector<Family> fams = {Family::SeparableQuartic, Family::CoupledQuartic, Family::Rosenbrock};
  std::vector<CheckResult> out;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const Problem& p = probs[c];
    double margin = std::numeric_limits<double>::infinity();
    double cap_margin = std::numeric_limits<double>::infinity();
    std::int64_t checked = 0;
    for (std::uint64_t k = 0; k < 3; ++k) {
      Rng rng(derive_seed(seed, 300 + 10 * c + k));
      const StartKind kind = fams[c] == Family::Rosenbrock ? StartKind::RosenbrockSaddle
                                                           : StartKind::OriginSaddle;
      const Vector x0 = make_start(fams[c], kind, p, kEps, rng);
      PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), kEps, kDelta);
      cfg.early_exit = true;
      cfg.grad_budget = 20000;
      cfg.trace_stride = 0;
      // Reservoir of 10 iterates inside the trust radius per run.
      std::vector<std::pair<Vector, Vector>> pool;
      std::int64_t seen = 0;
      Rng pick(derive_seed(seed, 400 + 10 * c + k));
      RunHooks hooks;
      hooks.on_episode_iterate = [&](const Vector& x, const Vector& y) {
        if ((y - x).norm() > cfg.r) return;
        ++seen;
        if (pool.size() < 10) {
          pool.emplace_back(x, y);
        } else {
          std::uniform_int_distribution<std::int64_t> u(0, seen - 1);
          const auto j = u(pick);
          if (j < 10) pool[static_cast<std::size_t>(j)] = {x, y};
        }
      };
      run_psd(p, cfg, x0, rng, hooks);
      for (const auto& [x, y] : pool) {
        const Vector z = y - x;
        const double lhs = (p.gradient(y) - p.gradient(x) - p.hvp(x, z)).norm();
        const double rhs = 0.5 * p.rho * z.squaredNorm();
        margin = std::min(margin, rhs + 1e-12 - lhs);
        cap_margin = std::min(cap_margin, kEps / 128.0 - rhs);
        ++checked;
      }
    }
    out.push_back(result("remainder_bound[" + p.name + "]",
                         checked > 0 && margin >= 0.0 && cap_margin >= 0.0,
                         std::min(margin, cap_margin),
                         fmt::format("{} episode iterates with |z| <= r", checked)));
  }
  return out;
}

std::vector<CheckResult> check_good_init(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const PsdConfig cfg = derive_params(25.0, 36.0, 1.0, kEps, kDelta, 10);
  const double r = cfg.r;
  const int n = 100'000;
  for (int d : {10, 100, 1000}) {
    Rng rng(derive_seed(seed, 500 + static_cast<std::uint64_t>(d)));
    const double thresh = r / std::sqrt(2.0 * (d + 2));
    std::int64_t hits = 0;
    double m2 = 0.0;
    double m4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vector xi = sample_ball(r, d, rng);
      const double z = xi[0];
      hits += std::abs(z) >= thresh ? 1 : 0;
      m2 += z * z;
      m4 += z * z * z * z;
    }
    const double prob = static_cast<double>(hits) / n;
    const double bound = (d + 4.0) / (12.0 * (d + 2.0));
    out.push_back(result(fmt::format("good_init[d={}]", d), prob >= bound - 0.01, prob - bound,
                         fmt::format("P = {:.4f} vs (d+4)/(12(d+2)) = {:.4f}", prob, bound)));
    const double e2 = r * r / (d + 2.0);
    const double e4 = 3.0 * std::pow(r, 4) / ((d + 2.0) * (d + 4.0));
    const double rel2 = std::abs(m2 / n / e2 - 1.0);
    const double rel4 = std::abs(m4 / n / e4 - 1.0);
    out.push_back(result(fmt::format("ball_moment_z2[d={}]", d), rel2 <= 0.02, 0.02 - rel2,
                         fmt::format("relative error {:.4f}", rel2)));
    out.push_back(result(fmt::format("ball_moment_z4[d={}]", d), rel4 <= 0.05, 0.05 - rel4,
                         fmt::format("relative error {:.4f}", rel4)));
  }
  return out;
}

bool same_trace(const RunTrace& a, const RunTrace& b) {
  if (a.samples.size() != b.samples.size() || a.episodes.size() != b.episodes.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& s = a.samples[i];
    const auto& t = b.samples[i];
    if (s.iter != t.iter || s.phase != t.phase || s.f != t.f || s.grad_norm != t.grad_norm ||
        s.episode_id != t.episode_id)
      return false;
  }
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    const auto& e = a.episodes[i];
    const auto& g = b.episodes[i];
    if (e.f_enter != g.f_enter || e.f_exit != g.f_exit || e.steps != g.steps) return false;
  }
  return a.terminal_status == b.terminal_status && a.grad_evals == b.grad_evals &&
         a.terminal_point == b.terminal_point;
}

std::vector<CheckResult> check_determinism(std::uint64_t seed) {
  const Problem p = make_separable_quartic(10);
  Rng start(derive_seed(seed, 600));
  const Vector x0 = make_start(Family::SeparableQuartic, StartKind::OriginSaddle, p, kEps, start);
  PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), kEps, kDelta);
  cfg.early_exit = true;
  Rng r1(seed);
  Rng r2(seed);
  const RunTrace a = run_psd(p, cfg, x0, r1);
  const RunTrace b = run_psd(p, cfg, x0, r2);

  std::vector<CheckResult> out;
  const bool det = same_trace(a, b);
  out.push_back(result("determinism", det, det ? 0.0 : -1.0,
                       fmt::format("{} samples compared", a.samples.size())));

  NoisyGradModel model{p, 0.0, derive_seed(seed, 601), 0};
  const PsgdConfig pcfg = make_psgd_config(cfg, 0.0, default_delta_fp());
  Rng r3(seed);
  const RunTrace c = run_psgd(model, pcfg, x0, r3);
  const bool same = same_trace(a, c);
  out.push_back(result("psgd_zero_noise_reduction", same, same ? 0.0 : -1.0,
                       fmt::format("{} vs {} samples", a.samples.size(), c.samples.size())));
  return out;
}

std::vector<CheckResult> check_lanczos(std::uint64_t seed) {
  std::vector<CheckResult> out;
  bool monotone = true;
  double worst_rise = 0.0;
  for (std::uint64_t t = 0; t < 10; ++t) {
    Rng rng(derive_seed(seed, 700 + t));
    const int d = std::uniform_int_distribution<int>(5, 50)(rng);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    Vector ev(d);
    for (int i = 0; i < d; ++i) ev[i] = u(rng);
    std::sort(ev.begin(), ev.end());
    const Problem p = make_random_quadratic(d, ev, rng());
    const Vector x = Vector::Zero(d);
    const std::uint64_t lseed = rng();
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= d; ++k) {
      const double est =
          lanczos_min_eig([&](const Vector& v) { return p.hvp(x, v); }, d, k, 1e-10 * p.ell, lseed)
              .lambda_min_est;
      if (est > prev + 1e-9) {
        monotone = false;
        worst_rise = std::max(worst_rise, est - prev);
      }
      prev = est;
    }
  }
  out.push_back(result("lanczos_monotone_k", monotone, monotone ? 0.0 : -worst_rise,
                       "10 random quadratics, k = 1..d"));

  int good = 0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    Rng rng(derive_seed(seed, 800 + t));
    const int d = std::uniform_int_distribution<int>(2, 50)(rng);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    Vector ev(d);
    for (int i = 0; i < d; ++i) ev[i] = u(rng);
    std::sort(ev.begin(), ev.end());
    const Problem p = make_random_quadratic(d, ev, rng());
    const Vector x = Vector::Zero(d);
    const double est =
        lanczos_min_eig([&](const Vector& v) { return p.hvp(x, v); }, d, d, 1e-10 * p.ell, rng())
            .lambda_min_est;
    const double err = std::abs(est - *p.exact_lambda_min);
    worst = std::max(worst, err);
    good += err <= 1e-6 ? 1 : 0;
  }
  out.push_back(result("lanczos_accuracy", good >= 95, good - 95.0,
                       fmt::format("{}/100 within 1e-6, worst {:.3g}", good, worst)));

  Rng a(seed);
  Rng b(seed);
  bool repro = true;
  for (int i = 0; i < 20; ++i) {
    repro = repro && sample_ball(0.5, 30, a) == sample_ball(0.5, 30, b);
    repro = repro && sample_sphere(30, a) == sample_sphere(30, b);
  }
  out.push_back(result("sampler_reproducible", repro, repro ? 0.0 : -1.0, "20 ball + sphere draws"));
  return out;
}

std::vector<CheckResult> check_probe(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng(derive_seed(seed, 900));

  double worst_q = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int d = std::uniform_int_distribution<int>(2, 30)(rng);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    Vector ev(d);
    for (int i = 0; i < d; ++i) ev[i] = u(rng);
    std::sort(ev.begin(), ev.end());
    const Problem p = make_random_quadratic(d, ev, rng());
    const Vector x = uniform_box(d, 1.0, rng);
    const Vector v = sample_sphere(d, rng);
    const double h = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const double q = central_diff_curvature(p, x, v, h);
    worst_q = std::max(worst_q, std::abs(q - v.dot(p.hvp(x, v))));
  }
  out.push_back(result("probe_bias_quadratic", worst_q <= 1e-9, 1e-9 - worst_q,
                       fmt::format("max |q - v'Av| = {:.3g} over 200 probes", worst_q)));

  const Problem quartics[] = {make_separable_quartic(10), make_coupled_quartic(10, 0.1)};
  double margin = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000; ++t) {
    const Problem& p = quartics[t % 2];
    const Vector x = uniform_box(p.dim, 1.5, rng);
    const Vector v = sample_sphere(p.dim, rng);
    const double h = std::exp(std::uniform_real_distribution<double>(std::log(0.005),
                                                                     std::log(0.5))(rng));
    const double q = central_diff_curvature(p, x, v, h);
    const double bias = std::abs(q - v.dot(p.hvp(x, v)));
    margin = std::min(margin, p.rho * h / 3.0 + 1e-9 - bias);
  }
  out.push_back(result("probe_bias_quartic", margin >= 0.0, margin,
                       "1000 random (x, v, h), bound rho h / 3"));

  int tried = 0;
  double inj_margin = std::numeric_limits<double>::infinity();
  const ProbeParams pp = make_probe_params(kEps, 36.0, kDelta, 10);
  const double gamma = std::sqrt(36.0 * kEps);
  for (int t = 0; t < 400 && tried < 200; ++t) {
    const Problem& p = quartics[t % 2];
    const Vector x = uniform_box(p.dim, 1.2, rng);
    Matrix h(p.dim, p.dim);
    for (int j = 0; j < p.dim; ++j) h.col(j) = p.hvp(x, Vector::Unit(p.dim, j));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
    if (es.eigenvalues()[0] > -gamma) continue;
    ++tried;
    const Vector v = es.eigenvectors().col(0).normalized();
    const ProbeReport rep = probe_directions(p, x, pp, std::span<const Vector>(&v, 1));
    inj_margin = std::min(inj_margin, -2.0 / 3.0 * gamma - rep.q_min);
  }
  out.push_back(result("probe_eigenvector_injection", tried > 0 && inj_margin >= 0.0, inj_margin,
                       fmt::format("{} points with lambda_min <= -gamma", tried)));

  const int m = make_probe_params(kEps, 36.0, 0.1, 10).m;
  out.push_back(result("probe_count", m == 119, m - 119.0, fmt::format("m(10, 0.1) = {}", m)));
  return out;
}

std::vector<CheckResult> check_psgd(std::uint64_t seed) {
  std::vector<CheckResult> out;
  const double dfp = default_delta_fp();
  const int d = 20;
  for (double ratio : {1.0, 10.0, 100.0}) {
    const double sigma2 = ratio * kEps * kEps;
    const int batch = batch_size(sigma2, kEps, dfp);
    const double tau = trigger_threshold(sigma2, kEps, batch);
    Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(ratio)));
    const Vector b = 2.0 * tau * sample_sphere(d, rng);
    const Problem p = make_random_quadratic(d, linspace(d, 1.0, 2.0), rng(), b);
    NoisyGradModel model{p, sigma2, rng(), 0};
    PsgdConfig cfg;
    cfg.sigma2 = sigma2;
    cfg.batch = batch;
    cfg.trigger_threshold = tau;
    int maybe = 0;
    const int trials = 10'000;
    const Vector x = Vector::Zero(d);
    for (int t = 0; t < trials; ++t)
      maybe += noise_aware_trigger(stochastic_grad(model, x, batch), cfg) ==
                       TriggerDecision::MaybeEscape
                   ? 1
                   : 0;
    const double rate = static_cast<double>(maybe) / trials;
    out.push_back(result(fmt::format("psgd_false_trigger[ratio={}]", ratio),
                         rate <= dfp + 0.02, dfp + 0.02 - rate,
                         fmt::format("rate {:.4f}, B = {}", rate, batch)));
  }

  bool mono = true;
  int prev = 0;
  for (double ratio : {0.0, 0.5, 1.0, 2.0, 10.0, 50.0, 100.0, 1000.0}) {
    const int b = batch_size(ratio * kEps * kEps, kEps, dfp);
    mono = mono && b >= prev;
    prev = b;
  }
  for (double sigma2 : {1e-6, 1e-4}) {
    int pe = std::numeric_limits<int>::max();
    for (double e : {1e-4, 1e-3, 1e-2, 1e-1}) {
      const int b = batch_size(sigma2, e, dfp);
      mono = mono && b <= pe;
      pe = b;
    }
    int pd = std::numeric_limits<int>::max();
    for (double df : {0.01, 0.05, 0.1, 0.27, 0.5, 0.9}) {
      const int b = batch_size(sigma2, kEps, df);
      mono = mono && b <= pd;
      pd = b;
    }
  }
  out.push_back(result("batch_monotonicity", mono, mono ? 0.0 : -1.0,
                       "sigma^2 up, eps up, delta_fp up"));

  std::vector<int> bs;
  for (double ratio : {0.0, 1.0, 10.0, 100.0}) bs.push_back(batch_size(ratio * kEps * kEps, kEps, dfp));
  const bool table = bs == std::vector<int>{1, 4, 40, 400};
  out.push_back(result("batch_table", table, table ? 0.0 : -1.0,
                       fmt::format("B = {}, {}, {}, {}", bs[0], bs[1], bs[2], bs[3])));
  return out;
}

}  // namespace

bool LemmaReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

LemmaReport run_lemma_checks(std::uint64_t seed) {
  LemmaReport rep;
  auto add = [&rep](std::vector<CheckResult> v) {
    for (auto& c : v) rep.checks.push_back(std::move(c));
  };

  DescentStats st;
  const auto runs = descent_runs(seed, st);
  rep.checks.push_back(result("descent_lemma", st.steps >= 10'000 && st.margin >= 0.0, st.margin,
                              fmt::format("{} descent steps over four families", st.steps)));
  rep.checks.push_back(check_descent_tight(seed));

  double count_margin = std::numeric_limits<double>::infinity();
  double budget_margin = std::numeric_limits<double>::infinity();
  int sosp_runs = 0;
  for (const auto& r : runs) {
    const double df_obs = r.trace.f_initial - r.trace.f_terminal;
    const double bound =
        snapped_ceil(8.0 * r.cfg.ell * df_obs / (3.0 * r.cfg.epsilon * r.cfg.epsilon)) + 1.0;
    count_margin = std::min(count_margin, bound - static_cast<double>(r.trace.descent_steps));
    if (r.trace.reached_sosp()) {
      ++sosp_runs;
      budget_margin = std::min(budget_margin, r.trace.total_bound -
                                                  static_cast<double>(r.trace.total_grad_evals));
    }
  }
  rep.checks.push_back(result("descent_count", count_margin >= 0.0, count_margin,
                              fmt::format("{} runs", runs.size())));
  rep.checks.push_back(result("budget_identity", sosp_runs > 0 && budget_margin >= 0.0,
                              budget_margin, fmt::format("{} SOSP runs", sosp_runs)));

  add(check_remainder(seed));
  add(check_good_init(seed));
  add(check_determinism(seed));
  add(check_lanczos(seed));
  add(check_probe(seed));
  add(check_psgd(seed));
  return rep;
}

std::string format_report(const LemmaReport& report) {
  std::ostringstream out;
  for (const auto& c : report.checks)
    out << fmt::format("{:<4} {:<36} margin={:<12.4g} {}\n", c.passed ? "ok" : "FAIL", c.name,
                       c.margin, c.detail);
  out << (report.all_passed() ? "all checks passed\n" : "some checks FAILED\n");
  return out.str();
}

}  // namespace escape
