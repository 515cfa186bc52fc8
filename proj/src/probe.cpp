#include "escape/probe.hpp"

#include <cmath>

#include "run_loop.hpp"

namespace escape {

ProbeParams make_probe_params(double eps, double rho, double delta, int d, bool strict) {
  require(eps > 0.0, "probe: eps must be positive");
  require(rho > 0.0, "probe: rho must be positive");
  require(delta > 0.0 && delta <= 1.0, "probe: delta must lie in (0, 1]");
  require(d >= 1, "probe: d must be >= 1");
  ProbeParams pp;
  pp.h = std::sqrt(eps / rho);
  pp.m = static_cast<int>(snapped_ceil(16.0 * std::log(16.0 * d / delta)));
  pp.m = std::max(pp.m, 1);
  pp.alpha = 0.125 * std::sqrt(eps / rho);
  const double gamma = std::sqrt(rho * eps);
  pp.threshold = strict ? -gamma : -2.0 / 3.0 * gamma;
  return pp;
}

namespace {

double second_difference(const Problem& p, const Vector& x, double fx, const Vector& v, double h) {
  return (p.value(x + h * v) - 2.0 * fx + p.value(x - h * v)) / (h * h);
}

}  // namespace

double central_diff_curvature(const Problem& p, const Vector& x, const Vector& v, double h) {
  require(h > 0.0, "probe radius must be positive");
  require(std::abs(v.norm() - 1.0) <= 1e-10, "probe direction must be a unit vector");
  return second_difference(p, x, p.value(x), v, h);
}

ProbeReport probe_directions(const Problem& p, const Vector& x, const ProbeParams& params,
                             std::span<const Vector> directions) {
  require(!directions.empty(), "probe needs at least one direction");
  ProbeReport rep;
  const double fx = p.value(x);
  rep.func_evals = 1;
  rep.q.reserve(directions.size());
  for (std::size_t i = 0; i < directions.size(); ++i) {
    const double q = second_difference(p, x, fx, directions[i], params.h);
    rep.func_evals += 2;
    rep.q.push_back(q);
    if (rep.index < 0 || q < rep.q_min) {
      rep.index = static_cast<int>(i);
      rep.q_min = q;
    }
  }
  rep.direction = directions[static_cast<std::size_t>(rep.index)];
  rep.detected = rep.q_min <= params.threshold;
  rep.x_next = rep.detected ? Vector(x + params.alpha * rep.direction) : x;
  return rep;
}

ProbeReport psd_probe_step(const Problem& p, const Vector& x, const ProbeParams& params, Rng& rng) {
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<std::size_t>(params.m));
  for (int i = 0; i < params.m; ++i) dirs.push_back(sample_sphere(p.dim, rng));
  return probe_directions(p, x, params, dirs);
}

RunTrace run_psd_probe(const Problem& p, const PsdConfig& cfg, const ProbeParams& probe,
                       const Vector& x0, Rng& rng, const RunHooks& hooks) {
  detail::LoopSpec spec;
  spec.main = detail::exact_source(p);
  spec.episode = spec.main;
  spec.trigger_threshold = cfg.epsilon;
  spec.decide = [&](const Vector& x, double, detail::LoopState& state) {
    using detail::EscapeDecision;
    const ProbeReport rep = psd_probe_step(p, x, probe, rng);
    state.charge_function_evals(rep.func_evals);
    EscapeDecision dec;
    if (!rep.detected) return dec;
    dec.kind = EscapeDecision::Kind::Escape;
    dec.y0 = rep.x_next;
    dec.perturbation_norm = probe.alpha;
    dec.probe_id = rep.index;
    dec.probe_q = rep.q_min;
    return dec;
  };
  return detail::run_loop(p, cfg, x0, spec, hooks);
}

}  // namespace escape
