#include <doctest.h>

#include <cmath>

#include "escape/psd.hpp"

using namespace escape;

TEST_CASE("derive_params closed forms") {
  const PsdConfig c = derive_params(1.0, 1.0, 1.0, 0.01, 0.1, 10);
  CHECK(c.eta == 0.5);
  CHECK(c.gamma == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(c.r == doctest::Approx(0.0125).epsilon(1e-15));
  CHECK(c.max_episodes == 1'280'001.0);
  CHECK(c.episode_length == 1716);
  CHECK(c.episode_length ==
        static_cast<std::int64_t>(std::ceil(80.0 * std::log(16.0 * 10 * 1'280'001 / 0.1))));
  CHECK_FALSE(c.quadratic_mode);

  const PsdConfig z = derive_params(1.0, 1.0, 0.0, 1.0, 1.0, 10);
  CHECK(z.max_episodes == 1.0);
  CHECK(z.episode_length == static_cast<std::int64_t>(std::ceil(8.0 * std::log(160.0))));

  const PsdConfig q = derive_params(1.0, 0.0, 1.0, 1e-3, 0.1, 5);
  CHECK(q.quadratic_mode);
  CHECK(q.eps_hessian == doctest::Approx(std::sqrt(1e-3)));

  CHECK_THROWS_AS(derive_params(-1.0, 1.0, 1.0, 0.01, 0.1, 10), InvalidArgument);
  CHECK_THROWS_AS(derive_params(1.0, -1.0, 1.0, 0.01, 0.1, 10), InvalidArgument);
  CHECK_THROWS_AS(derive_params(1.0, 1.0, -1.0, 0.01, 0.1, 10), InvalidArgument);
  CHECK_THROWS_AS(derive_params(1.0, 1.0, 1.0, 0.0, 0.1, 10), InvalidArgument);
}

TEST_CASE("quartic episode length grows with ln d") {
  const PsdConfig a = derive_params(25, 36, 2.5, 1e-3, 0.1, 10);
  const PsdConfig b = derive_params(25, 36, 25, 1e-3, 0.1, 100);
  CHECK(a.episode_length == 31814);
  CHECK(b.episode_length == 36668);
}

TEST_CASE("descent_step") {
  const Problem q = make_random_quadratic(2, Vector::Ones(2), 1);
  Vector x(2);
  x << 1, 0;
  const Vector xp = descent_step(q, x, 0.5);
  CHECK((xp - Vector((Vector(2) << 0.5, 0).finished())).norm() < 1e-15);
  CHECK(q.value(x) - q.value(xp) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(q.value(x) - q.value(xp) ==
        doctest::Approx(3.0 / 8.0 * q.gradient(x).squaredNorm()).epsilon(1e-14));

  const Problem s = make_separable_quartic(3);
  const Vector m = Vector::Constant(3, 1.0 / std::sqrt(2.0));
  CHECK((descent_step(s, Vector::Zero(3), 0.1) - Vector::Zero(3)).norm() == 0.0);
  CHECK((descent_step(s, m, 0.1) - m).norm() < 1e-15);

  const Problem r = make_rosenbrock(2);
  const Vector xr = descent_step(r, Vector::Zero(2), 1.0 / (2.0 * 2500.0));
  CHECK(xr[0] == doctest::Approx(2.0 / 5000.0));
  CHECK(xr[1] == 0.0);
  CHECK(r.value(xr) < r.value(Vector::Zero(2)));
}

TEST_CASE("sosp_check") {
  const Problem p = make_separable_quartic(10);
  const PsdConfig cfg = derive_params(p, 2.5, 1e-3, 0.1);
  Rng rng(1);
  const SospResult at_min = sosp_check(p, Vector::Constant(10, 1.0 / std::sqrt(2.0)), cfg, rng);
  CHECK(at_min.is_sosp);
  REQUIRE(at_min.lanczos.has_value());
  CHECK(at_min.lanczos->lambda_min_est == doctest::Approx(4.0).epsilon(1e-8));

  const SospResult at_origin = sosp_check(p, Vector::Zero(10), cfg, rng);
  CHECK_FALSE(at_origin.is_sosp);
  CHECK(at_origin.lanczos->lambda_min_est == doctest::Approx(-2.0).epsilon(1e-8));

  const SospResult steep = sosp_check(p, Vector::Constant(10, 0.3), cfg, rng);
  CHECK_FALSE(steep.is_sosp);
  CHECK_FALSE(steep.lanczos.has_value());
}

TEST_CASE("escape episode from the quartic origin saddle") {
  const Problem p = make_separable_quartic(10);
  PsdConfig cfg = derive_params(p, 2.5, 1e-3, 0.1);
  int ok = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    const EpisodeResult e = escape_episode(p, Vector::Zero(10), cfg, rng);
    CHECK(e.record.decrease == e.record.f_enter - e.record.f_exit);
    CHECK(e.record.steps <= cfg.episode_length);
    CHECK(e.record.perturbation_norm <= cfg.r);
    ok += e.record.success ? 1 : 0;
  }
  CHECK(ok >= 90);
}

TEST_CASE("escape episode contracts on a convex quadratic") {
  const Problem p = make_random_quadratic(4, Vector::Ones(4), 2);
  PsdConfig cfg = derive_params(1.0, 1.0, 1.0, 1e-2, 0.1, 4);
  cfg.episode_length = 30;
  Rng rng(3);
  const EpisodeResult e = escape_episode(p, Vector::Zero(4), cfg, rng);
  CHECK(e.record.f_exit >= e.record.f_enter - 0.5 * p.ell * cfg.r * cfg.r);
  CHECK(e.y.norm() < cfg.r);
}

TEST_CASE("escape episode matches the linear dynamics closed form") {
  const int d = 6;
  Vector ev = Vector::Ones(d);
  ev[0] = -1.0;
  const Problem p = make_random_quadratic(d, ev, 41);
  PsdConfig cfg = derive_params(1.0, 1.0, 1.0, 1e-2, 0.1, d);
  cfg.episode_length = 25;
  Matrix h(d, d);
  for (int j = 0; j < d; ++j) h.col(j) = p.hvp(Vector::Zero(d), Vector::Unit(d, j));
  Rng rng(9);
  Rng replay = rng;
  const Vector xi = sample_ball(cfg.r, d, replay);
  const EpisodeResult e = escape_episode(p, Vector::Zero(d), cfg, rng);
  const Matrix step = Matrix::Identity(d, d) - cfg.eta * h;
  Vector expect = xi;
  for (int t = 0; t < cfg.episode_length; ++t) expect = step * expect;
  CHECK((e.y - expect).norm() <= 1e-10);
}

TEST_CASE("PSD on the 10-d quartic from a saddle-adjacent start") {
  const Problem p = make_separable_quartic(10);
  Rng start(5);
  const Vector x0 = make_start(Family::SeparableQuartic, StartKind::OriginSaddle, p, 1e-3, start);
  PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
  Rng rng(6);
  const RunTrace tr = run_psd(p, cfg, x0, rng);
  REQUIRE(tr.terminal_status == TerminalStatus::Sosp);
  for (int i = 0; i < 10; ++i)
    CHECK(std::abs(std::abs(tr.terminal_point[i]) - 1.0 / std::sqrt(2.0)) < 1e-2);
  CHECK(tr.within_theorem_budget());
  CHECK(tr.grad_evals == tr.descent_steps + tr.episode_steps + tr.check_evals);
  CHECK(tr.total_grad_evals == tr.grad_evals + tr.hvp_grad_charge);
  CHECK(tr.iterations == tr.grad_evals);

  cfg.early_exit = true;
  Rng rng2(6);
  const RunTrace fast = run_psd(p, cfg, x0, rng2);
  CHECK(fast.reached_sosp());
  CHECK(fast.iterations < tr.iterations);
  CHECK(fast.iterations < 15'000);
}

TEST_CASE("gradient descent stalls at the saddle") {
  const Problem p = make_separable_quartic(10);
  Rng start(5);
  const Vector x0 = make_start(Family::SeparableQuartic, StartKind::OriginSaddle, p, 1e-3, start);
  PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
  cfg.escapes_enabled = false;
  cfg.grad_budget = 50'000;
  Rng rng(1);
  const RunTrace tr = run_psd(p, cfg, x0, rng);
  CHECK_FALSE(tr.reached_sosp());
  CHECK(tr.terminal_status == TerminalStatus::Stalled);
}

TEST_CASE("strongly convex quadratic: pure descent, no episodes") {
  const int d = 8;
  const Problem p = make_random_quadratic(d, Vector::LinSpaced(d, 1.0, 5.0), 3);
  Rng rng(2);
  const Vector x0 = sample_sphere(d, rng);
  const PsdConfig cfg = derive_params(p, p.value(x0), 1e-3, 0.1);
  const RunTrace tr = run_psd(p, cfg, x0, rng);
  CHECK(tr.reached_sosp());
  CHECK(tr.episodes.empty());
  CHECK(tr.terminal_point.norm() < 1e-3);
}

TEST_CASE("every descent step satisfies the sufficient decrease bound") {
  const Problem p = make_rosenbrock(6);
  Vector x0 = Vector::Ones(6);
  x0[0] = -1.2;
  PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
  cfg.grad_budget = 5000;
  int n = 0;
  RunHooks hooks;
  hooks.on_descent = [&](double f, double g2, double fn) {
    CHECK(fn <= f - 3.0 / (8.0 * p.ell) * g2 + 1e-12 * (1.0 + std::abs(f)));
    ++n;
  };
  Rng rng(1);
  const RunTrace tr = run_psd(p, cfg, x0, rng, hooks);
  CHECK(n == tr.descent_steps);
  const double df = tr.f_initial - tr.f_terminal;
  CHECK(tr.descent_steps <= std::ceil(8.0 * p.ell * df / (3.0 * 1e-6)) + 1);
}

TEST_CASE("runs are deterministic per seed") {
  const Problem p = make_coupled_quartic(8, 0.1);
  Rng s(1);
  const Vector x0 = make_start(Family::CoupledQuartic, StartKind::OriginSaddle, p, 1e-3, s);
  PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
  cfg.early_exit = true;
  Rng a(77);
  Rng b(77);
  const RunTrace ta = run_psd(p, cfg, x0, a);
  const RunTrace tb = run_psd(p, cfg, x0, b);
  REQUIRE(ta.samples.size() == tb.samples.size());
  for (std::size_t i = 0; i < ta.samples.size(); ++i) {
    CHECK(ta.samples[i].f == tb.samples[i].f);
    CHECK(ta.samples[i].grad_norm == tb.samples[i].grad_norm);
  }
  CHECK(ta.terminal_point == tb.terminal_point);
}

TEST_CASE("non-finite values abort the run") {
  Problem p = make_separable_quartic(2);
  p.gradient = [](const Vector& x) { return Vector(Vector::Constant(x.size(), NAN)); };
  const PsdConfig cfg = derive_params(25, 36, 1, 1e-3, 0.1, 2);
  Rng rng(1);
  CHECK_THROWS_AS(run_psd(p, cfg, Vector::Ones(2), rng), DivergenceError);
}

TEST_CASE("budget exhaustion is reported") {
  const Problem p = make_rosenbrock(4);
  Vector x0 = Vector::Ones(4);
  x0[0] = -1.2;
  PsdConfig cfg = derive_params(p, p.suboptimality_at(x0), 1e-3, 0.1);
  cfg.grad_budget = 100;
  Rng rng(1);
  const RunTrace tr = run_psd(p, cfg, x0, rng);
  CHECK(tr.terminal_status == TerminalStatus::BudgetExhausted);
  CHECK(tr.grad_evals == 100);
}
