#include "escape/psd.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "run_loop.hpp"

namespace escape {

namespace {

void ensure_finite(double f, const Vector& g, std::int64_t iter, const char* where) {
  if (std::isfinite(f) && g.allFinite()) return;
  std::ostringstream msg;
  msg << "non-finite " << (std::isfinite(f) ? "gradient" : "function value") << " during " << where
      << " at iteration " << iter << " (f=" << f << ")";
  throw DivergenceError(msg.str());
}

}  // namespace

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::Descent: return "descent";
    case Phase::Check: return "check";
    case Phase::Episode: return "episode";
  }
  return "unknown";
}

std::string status_name(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::Sosp: return "sosp";
    case TerminalStatus::BudgetExhausted: return "budget_exhausted";
    case TerminalStatus::EpisodeCap: return "episode_cap";
    case TerminalStatus::Stalled: return "stalled";
  }
  return "unknown";
}

PsdConfig derive_params(double ell, double rho, double delta_f, double epsilon, double delta,
                        int d, double eps_hessian) {
  require(ell > 0.0, "ell must be positive");
  require(rho >= 0.0, "rho must be non-negative");
  require(delta_f >= 0.0, "delta_f must be non-negative");
  require(epsilon > 0.0, "epsilon must be positive");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(d >= 1, "dimension must be >= 1");

  PsdConfig c;
  c.epsilon = epsilon;
  c.delta = delta;
  c.ell = ell;
  c.rho = rho;
  c.delta_f = delta_f;
  c.dim = d;
  c.eta = 1.0 / (2.0 * ell);
  c.max_episodes = 1.0 + snapped_ceil(128.0 * ell * delta_f / (epsilon * epsilon));

  if (rho == 0.0) {
    c.quadratic_mode = true;
    c.eps_hessian = eps_hessian > 0.0 ? eps_hessian : std::sqrt(epsilon);
    c.gamma = 0.0;
    c.r = epsilon / ell;
    c.episode_length = 0;
    return c;
  }
  c.gamma = std::sqrt(rho * epsilon);
  c.r = c.gamma / (8.0 * rho);
  const double log_term = std::log(16.0 * d * c.max_episodes / delta);
  c.episode_length = static_cast<std::int64_t>(snapped_ceil(8.0 * ell / c.gamma * log_term));
  return c;
}

PsdConfig derive_params(const Problem& p, double delta_f, double epsilon, double delta) {
  return derive_params(p.ell, p.rho, delta_f, epsilon, delta, p.dim);
}

bool RunTrace::within_theorem_budget() const {
  return reached_sosp() && static_cast<double>(grad_evals) <= total_bound;
}

Vector descent_step(const Problem& p, const Vector& x, double eta) {
  return x - eta * p.gradient(x);
}

namespace detail {

GradientSource exact_source(const Problem& p) {
  return GradientSource{[&p](const Vector& x) { return p.gradient(x); }, 1};
}

LanczosResult lanczos_at(const Problem& p, const Vector& x, const PsdConfig& cfg, Rng& rng) {
  int k = cfg.lanczos_k > 0 ? cfg.lanczos_k
                            : default_lanczos_iterations(p.dim, cfg.ell, cfg.curvature_threshold());
  k = std::min(k, p.dim);
  const double eps_term = cfg.lanczos_eps_term > 0.0 ? cfg.lanczos_eps_term : 1e-10 * cfg.ell;
  const std::uint64_t seed = rng();
  return lanczos_min_eig([&](const Vector& v) { return p.hvp(x, v); }, p.dim, k, eps_term, seed);
}

bool lanczos_accepts(const PsdConfig& cfg, double lambda_est) {
  const double c = cfg.curvature_threshold();
  return lambda_est >= -c + cfg.sosp_slack * c;
}

EpisodeRun run_episode_descent(const Problem& p, const PsdConfig& cfg, const Vector& x,
                               double f_enter, Vector y0, const GradientSource& source,
                               std::int64_t budget_left, const EpisodeObserver& observer,
                               const std::function<void(const Vector&, double)>& on_step) {
  EpisodeRun run;
  run.y = std::move(y0);
  const double target = cfg.escape_decrease();

  if (cfg.quadratic_mode) {
    // Single perturbation, then descend until the gradient test passes again.
    while (run.grad_evals + source.cost <= budget_left) {
      if (observer) observer(x, run.y);
      const Vector g = source.estimate(run.y);
      run.grad_evals += source.cost;
      ++run.steps;
      const double gn = g.norm();
      ensure_finite(0.0, g, run.steps, "episode");
      if (on_step) on_step(run.y, gn);
      if (gn <= cfg.epsilon) break;
      run.y -= cfg.eta * g;
    }
  } else {
    for (std::int64_t t = 0; t < cfg.episode_length; ++t) {
      if (run.grad_evals + source.cost > budget_left) break;
      if (observer) observer(x, run.y);
      const Vector g = source.estimate(run.y);
      run.grad_evals += source.cost;
      ++run.steps;
      ensure_finite(0.0, g, run.steps, "episode");
      if (on_step) on_step(run.y, g.norm());
      run.y -= cfg.eta * g;
      if (cfg.early_exit) {
        const double fy = p.value(run.y);
        ++run.func_evals;
        if (f_enter - fy >= target) break;
      }
    }
  }
  run.f_exit = p.value(run.y);
  ++run.func_evals;
  ensure_finite(run.f_exit, run.y, run.steps, "episode exit");
  return run;
}

RunTrace run_loop(const Problem& p, const PsdConfig& cfg, const Vector& x0, const LoopSpec& spec,
                  const RunHooks& hooks) {
  require(x0.size() == p.dim, "x0 dimension mismatch");
  require(x0.allFinite(), "x0 must be finite");

  RunTrace tr;
  tr.descent_bound_theorem = cfg.descent_bound_theorem();
  tr.descent_bound_refined = cfg.descent_bound_refined();
  tr.total_bound = cfg.total_bound();

  LoopState state(p, tr);
  std::int64_t iterations = 0;
  int current_episode = -1;

  auto sample = [&](std::int64_t iter, Phase phase, double f, double gn, bool force) {
    if (cfg.trace_stride <= 0) return;
    if (!force && iter % cfg.trace_stride != 0) return;
    TraceSample s;
    s.iter = iter;
    s.phase = phase;
    s.f = f;
    s.grad_norm = gn;
    s.episode_id = phase == Phase::Episode ? current_episode : -1;
    s.batch_size = spec.batch_size;
    s.trigger_threshold = spec.trigger_threshold;
    s.triggered = phase == Phase::Descent;
    tr.samples.push_back(s);
  };

  Vector x = x0;
  double f = p.value(x);
  ++tr.func_evals;
  tr.f_initial = f;
  ensure_finite(f, x, 0, "initialization");

  while (true) {
    if (tr.grad_evals + spec.main.cost > cfg.grad_budget) {
      tr.terminal_status = TerminalStatus::BudgetExhausted;
      break;
    }
    const Vector g = spec.main.estimate(x);
    tr.grad_evals += spec.main.cost;
    const std::int64_t iter = iterations++;
    const double gn = g.norm();
    ensure_finite(f, g, iter, "main loop");

    if (gn > spec.trigger_threshold) {
      sample(iter, Phase::Descent, f, gn, false);
      Vector next = x - cfg.eta * g;
      const double f_next = p.value(next);
      ++tr.func_evals;
      ensure_finite(f_next, next, iter, "descent step");
      if (hooks.on_descent) hooks.on_descent(f, gn * gn, f_next);
      ++tr.descent_steps;
      x = std::move(next);
      f = f_next;
      continue;
    }

    ++tr.check_evals;
    sample(iter, Phase::Check, f, gn, true);
    EscapeDecision dec = spec.decide(x, f, state);
    if (dec.kind == EscapeDecision::Kind::Terminate) {
      tr.terminal_status = TerminalStatus::Sosp;
      break;
    }
    if (dec.kind == EscapeDecision::Kind::Stall) {
      tr.terminal_status = TerminalStatus::Stalled;
      break;
    }
    if (static_cast<double>(tr.episodes.size()) >= cfg.max_episodes) {
      tr.terminal_status = TerminalStatus::EpisodeCap;
      break;
    }

    current_episode = static_cast<int>(tr.episodes.size());
    auto on_step = [&](const Vector& y, double g_norm) {
      const std::int64_t it = iterations++;
      if (cfg.trace_stride > 0 && it % cfg.trace_stride == 0) {
        const double fy = p.value(y);
        ++tr.func_evals;
        sample(it, Phase::Episode, fy, g_norm, true);
      }
    };
    EpisodeRun run = run_episode_descent(p, cfg, x, f, std::move(dec.y0), spec.episode,
                                         cfg.grad_budget - tr.grad_evals,
                                         hooks.on_episode_iterate, on_step);
    tr.grad_evals += run.grad_evals;
    tr.episode_steps += run.steps;
    tr.func_evals += run.func_evals;

    EpisodeRecord rec;
    rec.episode_id = current_episode;
    rec.f_enter = f;
    rec.f_exit = run.f_exit;
    rec.decrease = rec.f_enter - rec.f_exit;
    rec.steps = run.steps;
    rec.success = rec.decrease >= cfg.escape_decrease();
    rec.perturbation_norm = dec.perturbation_norm;
    rec.probe_id = dec.probe_id;
    rec.probe_q = dec.probe_q;
    tr.episodes.push_back(rec);
    x = std::move(run.y);
    f = run.f_exit;
  }

  tr.iterations = iterations;
  tr.terminal_point = x;
  tr.f_terminal = f;
  tr.total_grad_evals = tr.grad_evals + tr.hvp_grad_charge;
  return tr;
}

}  // namespace detail

SospResult sosp_check(const Problem& p, const Vector& x, const PsdConfig& cfg, Rng& rng) {
  SospResult res;
  res.grad_norm = p.gradient(x).norm();
  if (!(res.grad_norm <= cfg.epsilon)) return res;
  res.lanczos = detail::lanczos_at(p, x, cfg, rng);
  res.is_sosp = detail::lanczos_accepts(cfg, res.lanczos->lambda_min_est);
  return res;
}

EpisodeResult escape_episode(const Problem& p, const Vector& x, const PsdConfig& cfg, Rng& rng,
                             const EpisodeObserver& observer) {
  const Vector xi = sample_ball(cfg.r, p.dim, rng);
  const double f_enter = p.value(x);
  detail::EpisodeRun run = detail::run_episode_descent(p, cfg, x, f_enter, x + xi,
                                                       detail::exact_source(p), cfg.grad_budget,
                                                       observer);
  EpisodeResult out;
  out.y = std::move(run.y);
  out.record.f_enter = f_enter;
  out.record.f_exit = run.f_exit;
  out.record.decrease = f_enter - run.f_exit;
  out.record.steps = run.steps;
  out.record.success = out.record.decrease >= cfg.escape_decrease();
  out.record.perturbation_norm = xi.norm();
  return out;
}

RunTrace run_psd(const Problem& p, const PsdConfig& cfg, const Vector& x0, Rng& rng,
                 const RunHooks& hooks) {
  detail::LoopSpec spec;
  spec.main = detail::exact_source(p);
  spec.episode = spec.main;
  spec.trigger_threshold = cfg.epsilon;
  spec.decide = [&](const Vector& x, double, detail::LoopState& state) {
    using detail::EscapeDecision;
    const LanczosResult res = detail::lanczos_at(p, x, cfg, rng);
    state.charge_lanczos(res);
    EscapeDecision dec;
    if (detail::lanczos_accepts(cfg, res.lambda_min_est)) return dec;
    if (!cfg.escapes_enabled) {
      dec.kind = EscapeDecision::Kind::Stall;
      return dec;
    }
    const Vector xi = sample_ball(cfg.r, p.dim, rng);
    dec.kind = EscapeDecision::Kind::Escape;
    dec.y0 = x + xi;
    dec.perturbation_norm = xi.norm();
    return dec;
  };
  return detail::run_loop(p, cfg, x0, spec, hooks);
}

}  // namespace escape
