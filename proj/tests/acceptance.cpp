// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "escape/harness.hpp"
#include "escape/probe.hpp"

using namespace escape;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, double seconds) {
  if (!ok) ++failures;
  std::printf("%s criterion %d: %s (%.1fs)\n", ok ? "PASS" : "FAIL", id, what.c_str(), seconds);
  std::fflush(stdout);
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Vector box(int d, double half, Rng& rng) {
  std::uniform_real_distribution<double> u(-half, half);
  Vector x(d);
  for (int i = 0; i < d; ++i) x[i] = u(rng);
  return x;
}

Matrix dense_hessian(const Problem& p, const Vector& x) {
  Matrix h(p.dim, p.dim);
  for (int j = 0; j < p.dim; ++j) h.col(j) = p.hvp(x, Vector::Unit(p.dim, j));
  return 0.5 * (h + h.transpose());
}

void criterion_descent() {
  Timer t;
  std::int64_t steps = 0;
  std::int64_t violations = 0;
  std::vector<std::pair<Problem, Family>> probs = {
      {make_separable_quartic(10), Family::SeparableQuartic},
      {make_coupled_quartic(10, 0.1), Family::CoupledQuartic},
      {make_rosenbrock(10), Family::Rosenbrock},
      {make_random_quadratic(20, Vector::LinSpaced(20, 1.0, 100.0), 5), Family::RandomQuadratic}};
  std::vector<std::int64_t> per_family;
  for (auto& [p, fam] : probs) {
    std::int64_t before = steps;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      Rng rng(seed);
      Vector x0 = fam == Family::Rosenbrock ? make_start(fam, StartKind::RosenbrockClassic, p, 1e-3, rng)
                                            : Vector(1.2 * sample_sphere(p.dim, rng));
      PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
      cfg.early_exit = true;
      cfg.grad_budget = 3000;
      cfg.trace_stride = 0;
      const double c = 3.0 / (8.0 * p.ell);
      RunHooks hooks;
      hooks.on_descent = [&](double f, double g2, double fn) {
        ++steps;
        if (fn > f - c * g2 + 1e-12 * (1.0 + std::abs(f))) ++violations;
      };
      run_psd(p, cfg, x0, rng, hooks);
    }
    per_family.push_back(steps - before);
  }

  // f = 1/2 |x|^2: the bound holds with equality.
  const Problem half = make_random_quadratic(10, Vector::Ones(10), 3);
  Rng rng(9);
  const Vector x0 = 3.0 * sample_sphere(10, rng);
  PsdConfig cfg = derive_params(half, half.value(x0), 1e-3, 0.1);
  cfg.trace_stride = 0;
  double worst_gap = 0.0;
  bool tight = true;
  RunHooks hooks;
  hooks.on_descent = [&](double f, double g2, double fn) {
    const double gap = std::abs(fn - (f - 3.0 / 8.0 * g2));
    worst_gap = std::max(worst_gap, gap);
    tight = tight && gap <= 1e-12 * (1.0 + std::abs(f));
  };
  run_psd(half, cfg, x0, rng, hooks);

  const bool all_families =
      std::all_of(per_family.begin(), per_family.end(), [](std::int64_t n) { return n > 0; });
  const double secs = t.seconds();
  report(1, steps >= 10'000 && violations == 0 && all_families && tight && secs < 60,
         fmt::format("sufficient decrease: {} steps (per family {}/{}/{}/{}), {} violations; "
                     "quadratic max gap {:.2g}",
                     steps, per_family[0], per_family[1], per_family[2], per_family[3], violations,
                     worst_gap),
         secs);
}

void criterion_lanczos() {
  Timer t;
  int good = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(50'000 + s);
    const int d = std::uniform_int_distribution<int>(2, 50)(rng);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    Vector ev(d);
    for (int i = 0; i < d; ++i) ev[i] = u(rng);
    std::sort(ev.begin(), ev.end());
    const Problem p = make_random_quadratic(d, ev, rng());
    const Vector x = Vector::Zero(d);
    const double exact =
        Eigen::SelfAdjointEigenSolver<Matrix>(dense_hessian(p, x), Eigen::EigenvaluesOnly)
            .eigenvalues()[0];
    const double est =
        lanczos_min_eig([&](const Vector& v) { return p.hvp(x, v); }, d, d, 1e-10 * p.ell, rng())
            .lambda_min_est;
    const double err = std::abs(est - exact);
    worst = std::max(worst, err);
    good += err <= 1e-6 ? 1 : 0;
  }
  const double secs = t.seconds();
  report(5, good >= 95 && secs < 60,
         fmt::format("Lanczos k=d: {}/100 within 1e-6 of dense eigensolver (worst {:.2g})", good,
                     worst),
         secs);
}

void criterion_probe() {
  Timer t;
  Rng rng(6060);
  double quad_bias = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int d = std::uniform_int_distribution<int>(2, 20)(rng);
    const Problem q = make_random_quadratic(d, Vector::LinSpaced(d, -3.0, 4.0), rng());
    const Vector x = box(d, 1.0, rng);
    const Vector v = sample_sphere(d, rng);
    const double h = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    quad_bias = std::max(quad_bias, std::abs(central_diff_curvature(q, x, v, h) - v.dot(q.hvp(x, v))));
  }

  const Problem quartics[] = {make_separable_quartic(10), make_coupled_quartic(10, 0.1)};
  int bias_viol = 0;
  for (int i = 0; i < 1000; ++i) {
    const Problem& p = quartics[i % 2];
    const Vector x = box(p.dim, 1.5, rng);
    const Vector v = sample_sphere(p.dim, rng);
    const double h =
        std::exp(std::uniform_real_distribution<double>(std::log(0.005), std::log(0.5))(rng));
    const double bias = std::abs(central_diff_curvature(p, x, v, h) - v.dot(p.hvp(x, v)));
    bias_viol += bias <= p.rho * h / 3.0 + 1e-9 ? 0 : 1;
  }

  const double eps = 1e-3;
  int injected = 0;
  int inj_fail = 0;
  for (int i = 0; i < 1000 && injected < 300; ++i) {
    const Problem& p = quartics[i % 2];
    const double gamma = std::sqrt(p.rho * eps);
    const Vector x = box(p.dim, 1.2, rng);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(dense_hessian(p, x));
    if (es.eigenvalues()[0] > -gamma) continue;
    ++injected;
    const Vector v = es.eigenvectors().col(0).normalized();
    const ProbeParams pp = make_probe_params(eps, p.rho, 0.1, p.dim);
    const ProbeReport rep = probe_directions(p, x, pp, std::span<const Vector>(&v, 1));
    inj_fail += rep.q_min <= -2.0 / 3.0 * gamma ? 0 : 1;
  }
  const double secs = t.seconds();
  report(6, quad_bias <= 1e-9 && bias_viol == 0 && injected > 0 && inj_fail == 0 && secs < 60,
         fmt::format("probe bias: quadratic max {:.2g}; quartic violations {}/1000; "
                     "eigenvector injection failures {}/{}",
                     quad_bias, bias_viol, inj_fail, injected),
         secs);
}

void criterion_good_init() {
  Timer t;
  bool ok = true;
  std::string detail;
  for (int d : {10, 100, 1000}) {
    Rng rng(7000 + d);
    const double r = 1.0;
    const double thresh = r / std::sqrt(2.0 * (d + 2));
    const int n = 100'000;
    int hits = 0;
    double m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = sample_ball(r, d, rng)[0];
      hits += std::abs(z) >= thresh ? 1 : 0;
      m2 += z * z;
    }
    const double prob = static_cast<double>(hits) / n;
    const double bound = (d + 4.0) / (12.0 * (d + 2.0));
    const double rel = std::abs(m2 / n / (r * r / (d + 2.0)) - 1.0);
    ok = ok && prob >= bound - 0.01 && rel <= 0.02;
    detail += fmt::format(" d={}: P={:.3f}>={:.3f}, E[Z^2] err {:.2f}%;", d, prob, bound, 100 * rel);
  }
  const double secs = t.seconds();
  report(7, ok && secs < 60, "good initialization:" + detail, secs);
}

struct SweepRun {
  ResultsTable table;
  double seconds = 0.0;
};

SweepRun sweep(const std::string& name, const fs::path& out, int jobs) {
  ExperimentSpec s = default_spec(name);
  s.output_dir = out;
  s.jobs = jobs;
  fs::remove_all(out);
  Timer t;
  SweepRun r{run_experiment(s), 0.0};
  r.seconds = t.seconds();
  return r;
}

void criterion_success(const SweepRun& run) {
  const double rate = run.table.scalar("success_rate[d=100]");
  const ResultsRow* all = run.table.find("d=100/ordinal=all", "episode_decrease");
  const std::size_t n = all ? all->summary.n : 0;
  report(2, rate >= 0.90 && n >= 100 && run.seconds < 600,
         fmt::format("escape decrease: {:.3f} of {} episodes reach eps^2/(128 ell) at d=100", rate, n),
         run.seconds);
}

void criterion_scaling(const SweepRun& run) {
  const double r2 = run.table.scalar("fit_r2");
  const double spread = run.table.scalar("decrease_spread");
  report(3, r2 >= 0.95 && spread < 0.25 && run.seconds < 1200,
         fmt::format("T vs ln d fit R^2 = {:.6f}; median decrease spread across d = {:.3g}", r2,
                     spread),
         run.seconds);
}

void criterion_convergence(const SweepRun& run) {
  bool ok = true;
  std::string detail;
  for (const std::string pkey : {"separable_quartic-d10", "separable_quartic-d100", "rosenbrock-d10"}) {
    const ResultsRow* gd = run.table.find(pkey + "/GD", "iterations");
    const ResultsRow* psd = run.table.find(pkey + "/PSD", "iterations");
    const ResultsRow* pgd = run.table.find(pkey + "/PGD", "iterations");
    if (!gd || !psd || !pgd) {
      ok = false;
      detail += " " + pkey + ": missing rows;";
      continue;
    }
    const double p = run.table.scalar("wilcoxon_p[" + pkey + "]");
    const bool gd_cens = gd->censored == gd->summary.n;
    const bool psd_fast = psd->summary.median < 15'000;
    const bool beats = psd->summary.median < pgd->summary.median && p < 0.05;
    ok = ok && gd_cens && psd_fast && beats;
    detail += fmt::format(" {}: GD censored {}/{}, PSD median {}, PGD median {}, p={:.3g} [{}];",
                          pkey, gd->censored, gd->summary.n, psd->summary.median,
                          pgd->summary.median, p, gd_cens && psd_fast && beats ? "ok" : "miss");
  }
  report(4, ok && run.seconds < 1800, "convergence:" + detail, run.seconds);
}

void criterion_noise(const SweepRun& run) {
  Timer t;
  bool batch_ok = true;
  std::vector<double> medians;
  for (double ratio : {0.0, 1.0, 10.0, 100.0}) {
    const std::string key = fmt::format("d=100/sigma_ratio={}", fmt::format("{:.17g}", ratio));
    const ResultsRow* row = run.table.find(key, "grad_evals");
    medians.push_back(row ? row->summary.median : std::nan(""));
    batch_ok = batch_ok && run.table.scalar("batch[" + key + "]") ==
                               (ratio == 0 ? 1 : 4 * ratio);
  }
  bool increasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i)
    increasing = increasing && medians[i] > medians[i - 1];
  const double succ = run.table.scalar("success_rate[d=100/sigma_ratio=100]");

  // Zero noise against PSD on the same seeds.
  bool identical = true;
  const Problem p = make_separable_quartic(100);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng s(seed);
    const Vector x0 = make_start(Family::SeparableQuartic, StartKind::OriginSaddle, p, 1e-3, s);
    PsdConfig base = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
    base.early_exit = true;
    NoisyGradModel model{p, 0.0, seed, 0};
    Rng a(seed);
    Rng b(seed);
    const RunTrace st = run_psgd(model, make_psgd_config(base, 0.0, default_delta_fp()), x0, a);
    const RunTrace dt = run_psd(p, base, x0, b);
    identical = identical && st.samples.size() == dt.samples.size();
    for (std::size_t i = 0; identical && i < st.samples.size(); ++i)
      identical = st.samples[i].iter == dt.samples[i].iter &&
                  st.samples[i].phase == dt.samples[i].phase && st.samples[i].f == dt.samples[i].f &&
                  st.samples[i].grad_norm == dt.samples[i].grad_norm &&
                  st.samples[i].episode_id == dt.samples[i].episode_id;
    identical = identical && st.terminal_point == dt.terminal_point;
  }
  const double secs = run.seconds + t.seconds();
  report(8, batch_ok && identical && increasing && succ >= 0.85 && secs < 1800,
         fmt::format("noise: B column {}, sigma^2=0 trace-identical {}, grad-eval medians "
                     "{}/{}/{}/{} strictly increasing {}, success at 100: {:.3f}",
                     batch_ok ? "1/4/40/400" : "WRONG", identical ? "yes" : "no", medians[0],
                     medians[1], medians[2], medians[3], increasing ? "yes" : "no", succ),
         secs);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism(const fs::path& root, const std::vector<std::string>& names) {
  Timer t;
  std::size_t files = 0;
  std::size_t diffs = 0;
  for (const auto& name : names) {
    const fs::path a = root / "first" / name;
    const fs::path b = root / "second" / name;
    sweep(name, b, 2);
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      ++files;
      const fs::path other = b / fs::relative(e.path(), a);
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++diffs;
    }
    for (const auto& e : fs::recursive_directory_iterator(b))
      if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) ++diffs;
  }
  report(9, files > 0 && diffs == 0,
         fmt::format("determinism: {} output files compared across re-runs (jobs 1 vs 2), {} differ",
                     files, diffs),
         t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "escape_acceptance";

  criterion_descent();
  const SweepRun success = sweep("success_rate", root / "first" / "success_rate", 1);
  criterion_success(success);
  const SweepRun scaling = sweep("dimension_scaling", root / "first" / "dimension_scaling", 1);
  criterion_scaling(scaling);
  const SweepRun conv = sweep("convergence", root / "first" / "convergence", 1);
  criterion_convergence(conv);
  criterion_lanczos();
  criterion_probe();
  criterion_good_init();
  const SweepRun noise = sweep("noise_robustness", root / "first" / "noise_robustness", 1);
  criterion_noise(noise);
  criterion_determinism(root, {"success_rate", "dimension_scaling", "convergence", "noise_robustness"});

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
