#include "escape/baselines.hpp"

#include <cmath>

namespace escape {

RunTrace run_pgd(const Problem& p, const PsdConfig& cfg, const Vector& x0, Rng& rng,
                 const RunHooks& hooks) {
  require(x0.size() == p.dim, "x0 dimension mismatch");
  RunTrace tr;
  tr.descent_bound_theorem = cfg.descent_bound_theorem();
  tr.descent_bound_refined = cfg.descent_bound_refined();
  tr.total_bound = cfg.total_bound();

  Vector x = x0;
  double f = p.value(x);
  ++tr.func_evals;
  tr.f_initial = f;

  bool in_window = false;
  std::int64_t t_noise = 0;
  Vector x_noise;
  double f_noise = 0.0;
  EpisodeRecord rec;

  auto close_window = [&](std::int64_t steps) {
    rec.f_exit = f;
    rec.decrease = rec.f_enter - f;
    rec.steps = steps;
    rec.success = rec.decrease >= cfg.escape_decrease();
    tr.episodes.push_back(rec);
    in_window = false;
  };

  for (std::int64_t t = 0;; ++t) {
    if (in_window && t - t_noise > cfg.episode_length) {
      close_window(t - t_noise - 1);
      if (!tr.episodes.back().success) {
        x = x_noise;
        f = f_noise;
        tr.terminal_status = TerminalStatus::Sosp;
        break;
      }
    }
    if (tr.grad_evals + 1 > cfg.grad_budget) {
      tr.terminal_status = TerminalStatus::BudgetExhausted;
      break;
    }
    const Vector g = p.gradient(x);
    ++tr.grad_evals;
    ++tr.iterations;
    const double gn = g.norm();
    if (!std::isfinite(f) || !g.allFinite())
      throw DivergenceError("non-finite value in PGD at iteration " + std::to_string(t));

    if (!in_window && gn <= cfg.epsilon) {
      ++tr.check_evals;
      if (cfg.trace_stride > 0)
        tr.samples.push_back({t, Phase::Check, f, gn, -1, 1, cfg.epsilon, false});
      const Vector xi = sample_ball(cfg.r, p.dim, rng);
      in_window = true;
      t_noise = t;
      x_noise = x;
      f_noise = f;
      rec = EpisodeRecord{};
      rec.episode_id = static_cast<int>(tr.episodes.size());
      rec.f_enter = f;
      rec.perturbation_norm = xi.norm();
      x += xi;
      f = p.value(x);
      ++tr.func_evals;
      continue;
    }

    if (cfg.trace_stride > 0 && t % cfg.trace_stride == 0) {
      const Phase ph = in_window ? Phase::Episode : Phase::Descent;
      tr.samples.push_back(
          {t, ph, f, gn, in_window ? rec.episode_id : -1, 1, cfg.epsilon, gn > cfg.epsilon});
    }
    Vector next = x - cfg.eta * g;
    const double f_next = p.value(next);
    ++tr.func_evals;
    if (in_window) {
      if (hooks.on_episode_iterate) hooks.on_episode_iterate(x_noise, x);
      ++tr.episode_steps;
    } else {
      if (hooks.on_descent) hooks.on_descent(f, gn * gn, f_next);
      ++tr.descent_steps;
    }
    x = std::move(next);
    f = f_next;
  }

  tr.terminal_point = x;
  tr.f_terminal = f;
  tr.total_grad_evals = tr.grad_evals;
  return tr;
}

}  // namespace escape
