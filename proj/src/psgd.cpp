#include "escape/psgd.hpp"

#include <cmath>

#include "run_loop.hpp"

namespace escape {

double default_delta_fp() { return 2.0 * std::exp(-2.0); }

int batch_size(double sigma2, double epsilon, double delta_fp) {
  require(sigma2 >= 0.0, "sigma2 must be non-negative");
  require(epsilon > 0.0, "epsilon must be positive");
  require(delta_fp > 0.0 && delta_fp < 1.0, "delta_fp must lie in (0, 1)");
  const double b = snapped_ceil(2.0 * sigma2 / (epsilon * epsilon) * std::log(2.0 / delta_fp));
  return static_cast<int>(std::max(1.0, b));
}

double trigger_threshold(double sigma2, double epsilon, int batch) {
  return epsilon * std::sqrt(1.0 + 2.0 * sigma2 / (batch * epsilon * epsilon));
}

PsgdConfig make_psgd_config(const PsdConfig& base, double sigma2, double delta_fp) {
  PsgdConfig c;
  c.base = base;
  c.sigma2 = sigma2;
  c.delta_fp = delta_fp;
  c.batch = batch_size(sigma2, base.epsilon, delta_fp);
  c.trigger_threshold = trigger_threshold(sigma2, base.epsilon, c.batch);
  return c;
}

TriggerDecision noise_aware_trigger(const Vector& g_hat, const PsgdConfig& cfg) {
  return g_hat.norm() > cfg.trigger_threshold ? TriggerDecision::Descend
                                              : TriggerDecision::MaybeEscape;
}

RunTrace run_psgd(NoisyGradModel& model, const PsgdConfig& cfg, const Vector& x0, Rng& rng,
                  const RunHooks& hooks) {
  require(cfg.batch >= 1, "batch size must be >= 1");
  const Problem& p = model.base;
  const PsdConfig& base = cfg.base;

  detail::LoopSpec spec;
  spec.main = detail::GradientSource{
      [&model, &cfg](const Vector& x) { return stochastic_grad(model, x, cfg.batch); }, cfg.batch};
  spec.episode = cfg.exact_episode_gradients ? detail::exact_source(p) : spec.main;
  spec.trigger_threshold = cfg.trigger_threshold;
  spec.stochastic_columns = true;
  spec.batch_size = cfg.batch;
  spec.decide = [&](const Vector& x, double, detail::LoopState& state) {
    using detail::EscapeDecision;
    EscapeDecision dec;
    // The exact gradient here is verifier information and is not charged.
    if (p.gradient(x).norm() <= base.epsilon) {
      const LanczosResult res = detail::lanczos_at(p, x, base, rng);
      state.charge_lanczos(res);
      if (detail::lanczos_accepts(base, res.lambda_min_est)) return dec;
    }
    if (!base.escapes_enabled) {
      dec.kind = EscapeDecision::Kind::Stall;
      return dec;
    }
    const Vector xi = sample_ball(base.r, p.dim, rng);
    dec.kind = EscapeDecision::Kind::Escape;
    dec.y0 = x + xi;
    dec.perturbation_norm = xi.norm();
    return dec;
  };
  return detail::run_loop(p, base, x0, spec, hooks);
}

}  // namespace escape
