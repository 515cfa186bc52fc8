#include "escape/eigs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace escape {

namespace {

Vector gaussian_vector(int d, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

// Inverse iteration on the (small) tridiagonal matrix for the eigenvector of
// the eigenvalue `lambda`.
Vector tridiagonal_eigenvector(const std::vector<double>& diag, const std::vector<double>& off,
                               double lambda) {
  const int m = static_cast<int>(diag.size());
  if (m == 1) return Vector::Ones(1);
  double scale = 0.0;
  for (double a : diag) scale = std::max(scale, std::abs(a));
  for (double b : off) scale = std::max(scale, std::abs(b));
  const double shift = lambda - 1e-10 * (1.0 + scale);

  Matrix t = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) t(i, i) = diag[i] - shift;
  for (int i = 0; i + 1 < m; ++i) t(i, i + 1) = t(i + 1, i) = off[i];
  Eigen::PartialPivLU<Matrix> lu(t);

  Vector y = Vector::Ones(m) / std::sqrt(static_cast<double>(m));
  for (int it = 0; it < 3; ++it) {
    Vector next = lu.solve(y);
    const double n = next.norm();
    if (!std::isfinite(n) || n == 0.0) break;
    y = next / n;
  }
  return y;
}

}  // namespace

int sturm_count(std::span<const double> diag, std::span<const double> off, double x) {
  const double tiny = std::numeric_limits<double>::min();
  int count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double b2 = i == 0 ? 0.0 : off[i - 1] * off[i - 1];
    q = (diag[i] - x) - (i == 0 ? 0.0 : b2 / q);
    if (q == 0.0) q = -tiny;
    if (q < 0.0) ++count;
  }
  return count;
}

double tridiagonal_min_eigenvalue(std::span<const double> diag, std::span<const double> off,
                                  double tol) {
  require(!diag.empty(), "tridiagonal matrix must be non-empty");
  require(off.size() + 1 == diag.size(), "off-diagonal must have n - 1 entries");
  // Gershgorin enclosure.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const std::size_t n = diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double radius = 0.0;
    if (i > 0) radius += std::abs(off[i - 1]);
    if (i + 1 < n) radius += std::abs(off[i]);
    lo = std::min(lo, diag[i] - radius);
    hi = std::max(hi, diag[i] + radius);
  }
  lo -= tol;
  hi += tol;
  for (int it = 0; it < 2000 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(diag, off, mid) >= 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

LanczosResult lanczos_min_eig(const LinearOp& op, int d, int k, double eps_term,
                              std::uint64_t seed) {
  require(d >= 1, "lanczos: d must be >= 1");
  require(k >= 1, "lanczos: k must be >= 1");
  require(eps_term > 0.0, "lanczos: eps_term must be positive");

  Rng rng(seed);
  Vector v = gaussian_vector(d, rng);
  if (v.norm() == 0.0) v = gaussian_vector(d, rng);
  if (v.norm() == 0.0) throw std::runtime_error("lanczos: zero-norm starting vector");
  v /= v.norm();

  std::vector<Vector> basis;
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] is beta_{j+1}
  basis.reserve(static_cast<std::size_t>(std::min(k, d + 1)));

  LanczosResult res;
  Vector v_prev = Vector::Zero(d);
  double beta_j = 0.0;
  for (int j = 0; j < k; ++j) {
    basis.push_back(v);
    Vector w = op(v);
    ++res.matvecs;
    const double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v + beta_j * v_prev;
    const double b = w.norm();
    if (b < eps_term) {
      res.terminated_early = true;
      break;
    }
    if (j + 1 == k) break;
    beta.push_back(b);
    v_prev = v;
    v = w / b;
    beta_j = b;
  }

  res.iterations_used = static_cast<int>(alpha.size());
  res.lambda_min_est = tridiagonal_min_eigenvalue(alpha, beta);
  const Vector y = tridiagonal_eigenvector(alpha, beta, res.lambda_min_est);
  Vector dir = Vector::Zero(d);
  for (std::size_t i = 0; i < basis.size(); ++i) dir += y[static_cast<Eigen::Index>(i)] * basis[i];
  res.direction = dir / dir.norm();
  return res;
}

int default_lanczos_iterations(int d, double ell, double gamma) {
  if (!(gamma > 0.0)) return std::max(1, std::min(d, 200));
  const double k = std::ceil(10.0 * std::log(static_cast<double>(d)) * std::sqrt(ell / gamma));
  return std::max(1, static_cast<int>(std::min({static_cast<double>(d), k, 200.0})));
}

Vector sample_sphere(int d, Rng& rng) {
  require(d >= 1, "sample_sphere: d must be >= 1");
  Vector v = gaussian_vector(d, rng);
  double n = v.norm();
  while (n == 0.0) {
    v = gaussian_vector(d, rng);
    n = v.norm();
  }
  return v / n;
}

Vector sample_ball(double r, int d, Rng& rng) {
  require(r > 0.0, "sample_ball: radius must be positive");
  Vector v = sample_sphere(d, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return v * (r * std::pow(unif(rng), 1.0 / static_cast<double>(d)));
}

}  // namespace escape
