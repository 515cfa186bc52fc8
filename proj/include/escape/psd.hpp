#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "escape/common.hpp"
#include "escape/eigs.hpp"
#include "escape/oracle.hpp"

namespace escape {

/// Run parameters. The first block is derived from the smoothness constants
/// by `derive_params`; the second block holds practical switches.
struct PsdConfig {
  double epsilon = 0.0;
  double delta = 0.0;
  double ell = 0.0;
  double rho = 0.0;
  double delta_f = 0.0;
  int dim = 0;

  double eta = 0.0;
  /// Curvature scale sqrt(rho eps); replaced by `eps_hessian` in quadratic mode.
  double gamma = 0.0;
  /// Perturbation radius gamma / (8 rho), or eps / ell in quadratic mode.
  double r = 0.0;
  /// 1 + ceil(128 ell delta_f / eps^2). Kept as double since it can exceed 2^63
  /// for small eps; only its logarithm and its role as a cap are used.
  double max_episodes = 0.0;
  /// Episode length; 0 in quadratic mode (episodes end when |grad| <= eps again).
  std::int64_t episode_length = 0;
  /// rho = 0: single perturbation + descent, curvature threshold eps_hessian.
  bool quadratic_mode = false;
  double eps_hessian = 0.0;

  /// Hard cap on gradient evaluations (descent + episode + check evaluations).
  std::int64_t grad_budget = 10'000'000;
  /// End an episode as soon as the decrease reaches eps^2 / (128 ell).
  bool early_exit = false;
  /// False gives vanilla gradient descent: a non-SOSP stationary point stalls.
  bool escapes_enabled = true;
  /// Lanczos iterations; 0 selects `default_lanczos_iterations`.
  int lanczos_k = 0;
  /// Lanczos breakdown threshold; 0 selects 1e-10 * ell.
  double lanczos_eps_term = 0.0;
  /// Declare lambda_min >= -gamma when the estimate is >= -gamma + slack * gamma.
  double sosp_slack = 0.25;
  /// Record a trace sample every `trace_stride` gradient evaluations (0 = off).
  int trace_stride = 1;

  /// Per-episode decrease target eps^2 / (128 ell).
  [[nodiscard]] double escape_decrease() const { return epsilon * epsilon / (128.0 * ell); }
  /// Descent-phase bound of the main theorem, 4 ell delta_f / eps^2.
  [[nodiscard]] double descent_bound_theorem() const {
    return 4.0 * ell * delta_f / (epsilon * epsilon);
  }
  /// Refined descent-phase bound from the 3/(8 ell) per-step decrease, 8 ell delta_f / (3 eps^2).
  [[nodiscard]] double descent_bound_refined() const {
    return 8.0 * ell * delta_f / (3.0 * epsilon * epsilon);
  }
  /// Total gradient-evaluation bound 4 ell delta_f / eps^2 + M T.
  [[nodiscard]] double total_bound() const {
    return descent_bound_theorem() + max_episodes * static_cast<double>(episode_length);
  }
  [[nodiscard]] double curvature_threshold() const { return quadratic_mode ? eps_hessian : gamma; }
};

/// Closed-form run parameters (natural logarithm). `eps_hessian` is only used
/// when rho = 0.
PsdConfig derive_params(double ell, double rho, double delta_f, double epsilon, double delta,
                        int d, double eps_hessian = 0.0);

/// Convenience: derive parameters from a problem's constants.
PsdConfig derive_params(const Problem& p, double delta_f, double epsilon, double delta);

struct EpisodeRecord {
  int episode_id = 0;
  double f_enter = 0.0;
  double f_exit = 0.0;
  double decrease = 0.0;
  std::int64_t steps = 0;
  bool success = false;
  double perturbation_norm = 0.0;
  /// Probe index that triggered the episode (PSD-Probe only), otherwise -1.
  int probe_id = -1;
  double probe_q = 0.0;
};

enum class Phase { Descent, Check, Episode };
enum class TerminalStatus { Sosp, BudgetExhausted, EpisodeCap, Stalled };

std::string phase_name(Phase p);
std::string status_name(TerminalStatus s);

struct TraceSample {
  std::int64_t iter = 0;
  Phase phase = Phase::Descent;
  double f = 0.0;
  double grad_norm = 0.0;
  int episode_id = -1;
  // Stochastic runs only.
  int batch_size = 1;
  double trigger_threshold = 0.0;
  bool triggered = false;
};

/// Observer for every executed descent step: (f(x), |grad f(x)|^2, f(x+)).
using DescentObserver = std::function<void(double f_x, double grad_sq, double f_next)>;
/// Observer for episode iterates: (episode entry point x, current iterate y).
using EpisodeObserver = std::function<void(const Vector& x, const Vector& y)>;

struct RunHooks {
  DescentObserver on_descent;
  EpisodeObserver on_episode_iterate;
};

struct RunTrace {
  std::vector<TraceSample> samples;
  std::vector<EpisodeRecord> episodes;
  std::int64_t descent_steps = 0;
  std::int64_t episode_steps = 0;
  /// Gradient evaluations at points where no step was taken (stationarity checks).
  std::int64_t check_evals = 0;
  /// Main-loop passes plus episode steps. Equals grad_evals for deterministic
  /// runs; stochastic runs charge the batch size per iteration.
  std::int64_t iterations = 0;
  /// Gradient evaluations along the algorithm's path; the quantity bounded by
  /// the main theorem.
  std::int64_t grad_evals = 0;
  std::int64_t hvp_evals = 0;
  /// Gradient-equivalent charge for HVPs (2 per finite-difference HVP).
  std::int64_t hvp_grad_charge = 0;
  std::int64_t func_evals = 0;
  /// grad_evals + hvp_grad_charge.
  std::int64_t total_grad_evals = 0;
  Vector terminal_point;
  TerminalStatus terminal_status = TerminalStatus::BudgetExhausted;
  double f_initial = 0.0;
  double f_terminal = 0.0;
  /// Last Lanczos estimate at a stationarity check.
  std::optional<double> last_lambda_est;
  double descent_bound_theorem = 0.0;
  double descent_bound_refined = 0.0;
  double total_bound = 0.0;

  [[nodiscard]] bool reached_sosp() const { return terminal_status == TerminalStatus::Sosp; }
  /// True when the run terminated at an SOSP and its gradient count respects the
  /// theorem's bound.
  [[nodiscard]] bool within_theorem_budget() const;
};

/// x - eta grad f(x).
Vector descent_step(const Problem& p, const Vector& x, double eta);

struct SospResult {
  bool is_sosp = false;
  double grad_norm = 0.0;
  /// Present only when Lanczos ran.
  std::optional<LanczosResult> lanczos;
};

/// |grad f(x)| <= eps and the Lanczos estimate of lambda_min >= -gamma + slack gamma.
/// Lanczos is skipped when the gradient test fails.
SospResult sosp_check(const Problem& p, const Vector& x, const PsdConfig& cfg, Rng& rng);

struct EpisodeResult {
  Vector y;
  EpisodeRecord record;
};

/// One saddle-escape episode: y0 = x + xi with xi ~ Unif(B(0, r)), then T
/// gradient steps. Honors `cfg.early_exit`.
EpisodeResult escape_episode(const Problem& p, const Vector& x, const PsdConfig& cfg, Rng& rng,
                             const EpisodeObserver& observer = {});

/// Perturbed saddle-escape descent main loop. Throws DivergenceError on
/// non-finite f or grad f.
RunTrace run_psd(const Problem& p, const PsdConfig& cfg, const Vector& x0, Rng& rng,
                 const RunHooks& hooks = {});

}  // namespace escape
