#pragma once

#include "escape/oracle.hpp"
#include "escape/psd.hpp"

namespace escape {

/// Stochastic variant settings.
struct PsgdConfig {
  PsdConfig base;
  double sigma2 = 0.0;
  double delta_fp = 0.2707;
  int batch = 1;
  /// eps sqrt(1 + 2 sigma^2 / (B eps^2)).
  double trigger_threshold = 0.0;
  /// Use exact gradients inside escape episodes instead of batch estimates.
  bool exact_episode_gradients = false;
};

/// Default false-positive rate 2 e^{-2}, for which log(2 / delta_fp) = 2.
double default_delta_fp();

/// max{1, ceil((2 sigma^2 / eps^2) log(2 / delta_fp))}.
int batch_size(double sigma2, double epsilon, double delta_fp);

/// eps sqrt(1 + 2 sigma^2 / (B eps^2)).
double trigger_threshold(double sigma2, double epsilon, int batch);

PsgdConfig make_psgd_config(const PsdConfig& base, double sigma2, double delta_fp);

enum class TriggerDecision { Descend, MaybeEscape };

/// Descend iff |g_hat| exceeds the noise-aware threshold.
TriggerDecision noise_aware_trigger(const Vector& g_hat, const PsgdConfig& cfg);

/// Stochastic main loop. Convergence is declared by the exact second-order
/// check; with sigma2 = 0 the trace matches run_psd under the same seed.
RunTrace run_psgd(NoisyGradModel& model, const PsgdConfig& cfg, const Vector& x0, Rng& rng,
                  const RunHooks& hooks = {});

}  // namespace escape
