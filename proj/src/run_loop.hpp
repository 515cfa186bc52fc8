#pragma once

// Shared main loop behind run_psd, run_psd_probe and run_psgd. The variants
// differ only in how gradients are estimated and in what happens once the
// gradient estimate falls below the trigger threshold.

#include <functional>
#include <optional>

#include "escape/psd.hpp"

namespace escape::detail {

struct GradientSource {
  std::function<Vector(const Vector&)> estimate;
  /// Gradient evaluations charged per call (the batch size for stochastic sources).
  int cost = 1;
};

struct EscapeDecision {
  enum class Kind { Terminate, Stall, Escape };
  Kind kind = Kind::Terminate;
  /// Episode starting point when kind == Escape.
  Vector y0;
  double perturbation_norm = 0.0;
  int probe_id = -1;
  double probe_q = 0.0;
};

class LoopState;

/// Called when the trigger test says "small gradient". May run Lanczos or probes;
/// accounting goes through the LoopState.
using DecideFn = std::function<EscapeDecision(const Vector& x, double f, LoopState& state)>;

struct LoopSpec {
  GradientSource main;
  GradientSource episode;
  double trigger_threshold = 0.0;
  bool stochastic_columns = false;
  int batch_size = 1;
  DecideFn decide;
};

class LoopState {
 public:
  LoopState(const Problem& p, RunTrace& trace) : p_(p), trace_(trace) {}

  void charge_lanczos(const LanczosResult& res) {
    trace_.hvp_evals += res.matvecs;
    trace_.hvp_grad_charge += static_cast<std::int64_t>(res.matvecs) * p_.hvp_gradient_cost();
    trace_.last_lambda_est = res.lambda_min_est;
  }
  void charge_function_evals(std::int64_t n) { trace_.func_evals += n; }

 private:
  const Problem& p_;
  RunTrace& trace_;
};

RunTrace run_loop(const Problem& p, const PsdConfig& cfg, const Vector& x0, const LoopSpec& spec,
                  const RunHooks& hooks);

/// Episode descent from y0 using `source`; shared by the standalone escape
/// episode and the main loop. `budget_left` limits gradient evaluations.
struct EpisodeRun {
  Vector y;
  std::int64_t steps = 0;
  std::int64_t grad_evals = 0;
  std::int64_t func_evals = 0;
  double f_exit = 0.0;
};

EpisodeRun run_episode_descent(const Problem& p, const PsdConfig& cfg, const Vector& x,
                               double f_enter, Vector y0, const GradientSource& source,
                               std::int64_t budget_left, const EpisodeObserver& observer,
                               const std::function<void(const Vector&, double)>& on_step = {});

/// Exact-gradient source for a problem.
GradientSource exact_source(const Problem& p);

/// Lanczos-based curvature test at a point whose gradient test already passed.
LanczosResult lanczos_at(const Problem& p, const Vector& x, const PsdConfig& cfg, Rng& rng);

bool lanczos_accepts(const PsdConfig& cfg, double lambda_est);

}  // namespace escape::detail
