#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "escape/common.hpp"

namespace escape {

using LinearOp = std::function<Vector(const Vector&)>;

struct LanczosResult {
  double lambda_min_est = 0.0;
  /// Unit Ritz vector for the smallest Ritz value.
  Vector direction;
  int iterations_used = 0;
  /// True when beta_{j+1} dropped below eps_term before k steps.
  bool terminated_early = false;
  /// Number of operator applications performed.
  int matvecs = 0;
};

/// Randomized Lanczos estimate of the smallest eigenvalue of a symmetric
/// operator, using the plain three-term recurrence (no re-orthogonalization).
/// The starting vector is a normalized Gaussian draw from `seed`.
LanczosResult lanczos_min_eig(const LinearOp& op, int d, int k, double eps_term,
                              std::uint64_t seed);

/// Smallest eigenvalue of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal (size n - 1), by Sturm-sequence bisection.
double tridiagonal_min_eigenvalue(std::span<const double> diag, std::span<const double> off,
                                  double tol = 1e-12);

/// Number of eigenvalues of the tridiagonal matrix strictly less than x.
int sturm_count(std::span<const double> diag, std::span<const double> off, double x);

/// Default Lanczos iteration count min(d, ceil(10 log(d) sqrt(ell/gamma)), 200),
/// at least 1.
int default_lanczos_iterations(int d, double ell, double gamma);

/// Uniform draw from the solid ball of radius r in R^d.
Vector sample_ball(double r, int d, Rng& rng);

/// Uniform draw from the unit sphere S^{d-1}.
Vector sample_sphere(int d, Rng& rng);

}  // namespace escape
