#pragma once

#include <span>
#include <vector>

#include "escape/psd.hpp"

namespace escape {

/// Finite-difference negative-curvature probe settings.
struct ProbeParams {
  /// Probe radius sqrt(eps / rho).
  double h = 0.0;
  /// Number of random directions, ceil(16 log(16 d / delta)).
  int m = 1;
  /// Step taken along a detected direction, sqrt(eps / rho) / 8.
  double alpha = 0.0;
  /// Detection fires when q <= threshold.
  double threshold = 0.0;
};

/// Probe settings for tolerance eps, Hessian-Lipschitz constant rho > 0 and
/// confidence delta. The default threshold is -(2/3) sqrt(rho eps), the level
/// an exact eigenvector is guaranteed to reach; `strict` uses -sqrt(rho eps).
ProbeParams make_probe_params(double eps, double rho, double delta, int d, bool strict = false);

/// Central second difference (f(x + h v) - 2 f(x) + f(x - h v)) / h^2 for a unit v.
double central_diff_curvature(const Problem& p, const Vector& x, const Vector& v, double h);

struct ProbeReport {
  bool detected = false;
  /// argmin index over the probes (lowest index on ties).
  int index = -1;
  double q_min = 0.0;
  Vector direction;
  std::vector<double> q;
  int func_evals = 0;
  /// x + alpha v on detection, x otherwise.
  Vector x_next;
};

/// Evaluates the probe on the given unit directions and applies the step rule.
ProbeReport probe_directions(const Problem& p, const Vector& x, const ProbeParams& params,
                             std::span<const Vector> directions);

/// Draws `params.m` uniform unit directions and applies the step rule.
ProbeReport psd_probe_step(const Problem& p, const Vector& x, const ProbeParams& params, Rng& rng);

/// PSD with the Lanczos test replaced by the probe. A detection takes the
/// alpha step and then a T-step episode descent (no ball perturbation); no
/// detection ends the run.
RunTrace run_psd_probe(const Problem& p, const PsdConfig& cfg, const ProbeParams& probe,
                       const Vector& x0, Rng& rng, const RunHooks& hooks = {});

}  // namespace escape
