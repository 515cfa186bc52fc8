#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "escape/common.hpp"

namespace escape {

using ValueFn = std::function<double(const Vector&)>;
using GradFn = std::function<Vector(const Vector&)>;
using HvpFn = std::function<Vector(const Vector& x, const Vector& v)>;

/// Black-box objective with smoothness metadata.
///
/// `ell` bounds the gradient Lipschitz constant and `rho` the Hessian Lipschitz
/// constant on the region the optimizer visits. For the built-in families these
/// are analytic bounds on the box |x_i| <= 1.5 and may be overridden. `delta_f`
/// is the suboptimality of the family's reference saddle (an estimate the
/// caller may replace with f(x0) - f_lower).
struct Problem {
  std::string name;
  int dim = 0;
  ValueFn value;
  GradFn gradient;
  /// Empty when no analytic Hessian-vector product exists; `hvp()` then falls
  /// back to central differences of the gradient.
  HvpFn hessian_vector;
  double ell = 1.0;
  double rho = 0.0;
  double delta_f = 0.0;
  /// Known lower bound on inf f, when the family has one.
  std::optional<double> f_lower;
  /// Exact minimum Hessian eigenvalue for constant-Hessian families.
  std::optional<double> exact_lambda_min;

  [[nodiscard]] bool has_analytic_hvp() const { return static_cast<bool>(hessian_vector); }

  /// Hessian-vector product, analytic when available.
  [[nodiscard]] Vector hvp(const Vector& x, const Vector& v) const;

  /// Gradient evaluations charged per `hvp()` call (0 analytic, 2 finite difference).
  [[nodiscard]] int hvp_gradient_cost() const { return has_analytic_hvp() ? 0 : 2; }

  /// f(x0) - f_lower when a lower bound is known, otherwise `delta_f`.
  [[nodiscard]] double suboptimality_at(const Vector& x0) const;
};

/// f(x) = sum_i (x_i^4 - x_i^2). ell = 25, rho = 36 on the box |x_i| <= 1.5.
Problem make_separable_quartic(int d);

/// Separable quartic plus coupling * sum_{i<j} x_i x_j. Gradient is O(d).
Problem make_coupled_quartic(int d, double coupling = 0.1);

/// Extended Rosenbrock, sum_{i<d} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2.
Problem make_rosenbrock(int d);

/// f(x) = 1/2 x^T A x - b^T x with A = Q^T diag(eigenvalues) Q and Q a seeded
/// random orthogonal matrix. rho = 0, ell = max |lambda_i|.
Problem make_random_quadratic(int d, const Vector& eigenvalues, std::uint64_t seed,
                              const Vector& b);

/// Same, with b = 0.
Problem make_random_quadratic(int d, const Vector& eigenvalues, std::uint64_t seed);

/// Central-difference HVP: (grad(x + h u) - grad(x - h u)) / (2h) * |v| with
/// u = v / |v|. Returns the zero vector for v = 0.
Vector hvp_finite_difference(const Problem& p, const Vector& x, const Vector& v, double h);

/// Default finite-difference step for HVPs at x.
inline double default_hvp_step(const Vector& x) { return 1e-5 * (1.0 + x.norm()); }

/// Stochastic gradient model: grad f(x) plus isotropic Gaussian noise with
/// E|zeta|^2 = sigma2 per sample (per-coordinate variance sigma2 / d).
///
/// Each call to `stochastic_grad` draws from a stream derived from
/// (seed, call counter), so results depend only on the seed and how many calls
/// came before.
struct NoisyGradModel {
  Problem base;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t calls = 0;
};

/// Mean of `batch` independent noisy samples of grad f(x).
Vector stochastic_grad(NoisyGradModel& model, const Vector& x, int batch);

/// Canonical family names accepted by `make_problem`.
enum class Family { SeparableQuartic, CoupledQuartic, Rosenbrock, RandomQuadratic };

Family parse_family(const std::string& name);
std::string family_name(Family f);

struct FamilyParams {
  double coupling = 0.1;
  /// Random quadratic spectrum, linearly spaced from min to max.
  double spectrum_min = 1.0;
  double spectrum_max = 10.0;
  std::uint64_t quadratic_seed = 0;
  /// Overrides for the analytic constants; <= 0 means keep the family default.
  double ell_override = 0.0;
  double rho_override = -1.0;
};

Problem make_problem(Family family, int d, const FamilyParams& params = {});

/// Starting-point laws used by the experiments.
enum class StartKind {
  /// Family default: saddle-adjacent for quartics, classic for Rosenbrock,
  /// unit sphere for random quadratics.
  Standard,
  /// Within eps/(4 ell) of the origin saddle.
  OriginSaddle,
  /// Near the separable-quartic saddle with x_1 = 0 and |x_i| = 1/sqrt(2)
  /// elsewhere (exactly one escape direction).
  IndexOneSaddle,
  /// Within eps/(4 ell) of the Rosenbrock strict saddle.
  RosenbrockSaddle,
  /// (-1.2, 1, ..., 1).
  RosenbrockClassic,
  /// Uniform on the unit sphere.
  UnitSphere,
};

StartKind parse_start(const std::string& name);

/// Draws a starting point. Saddle-adjacent starts add a ball perturbation of
/// radius eps / (4 ell) so that |grad f(x0)| <= eps / 4.
Vector make_start(Family family, StartKind kind, const Problem& p, double eps, Rng& rng);

/// Strict saddle of the extended Rosenbrock function near
/// (-0.555, 0.322, 0.115, ...), refined by Newton's method. Throws when the
/// refinement does not converge for the requested dimension.
Vector rosenbrock_saddle(int d);

}  // namespace escape
