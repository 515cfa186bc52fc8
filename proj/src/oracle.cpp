#include "escape/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "escape/eigs.hpp"

namespace escape {

namespace {

// Box |x_i| <= kBox encloses the standard starts and the sublevel sets the
// experiments visit; the analytic constants below are bounds on it.
constexpr double kBox = 1.5;

double quartic_sum(const Vector& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi2 = x[i] * x[i];
    s += xi2 * xi2 - xi2;
  }
  return s;
}

Vector quartic_grad(const Vector& x) {
  return (4.0 * x.array().cube() - 2.0 * x.array()).matrix();
}

Vector quartic_hvp(const Vector& x, const Vector& v) {
  return ((12.0 * x.array().square() - 2.0) * v.array()).matrix();
}

}  // namespace

Vector Problem::hvp(const Vector& x, const Vector& v) const {
  if (hessian_vector) return hessian_vector(x, v);
  return hvp_finite_difference(*this, x, v, default_hvp_step(x));
}

double Problem::suboptimality_at(const Vector& x0) const {
  if (f_lower) return std::max(0.0, value(x0) - *f_lower);
  return delta_f;
}

Problem make_separable_quartic(int d) {
  require(d >= 1, "separable quartic needs d >= 1");
  Problem p;
  p.name = "separable_quartic";
  p.dim = d;
  p.value = quartic_sum;
  p.gradient = quartic_grad;
  p.hessian_vector = quartic_hvp;
  p.ell = 12.0 * kBox * kBox - 2.0;
  p.rho = 24.0 * kBox;
  p.f_lower = -0.25 * d;
  p.delta_f = 0.25 * d;
  return p;
}

Problem make_coupled_quartic(int d, double coupling) {
  require(d >= 2, "coupled quartic needs d >= 2");
  Problem p;
  p.name = "coupled_quartic";
  p.dim = d;
  p.value = [coupling](const Vector& x) {
    double f = quartic_sum(x);
    if (coupling != 0.0) {
      // sum_{i<j} x_i x_j = (S^2 - |x|^2) / 2
      const double s = x.sum();
      f += coupling * 0.5 * (s * s - x.squaredNorm());
    }
    return f;
  };
  p.gradient = [coupling](const Vector& x) {
    Vector g = quartic_grad(x);
    if (coupling != 0.0) {
      const double s = x.sum();
      g.array() += coupling * (s - x.array());
    }
    return g;
  };
  p.hessian_vector = [coupling](const Vector& x, const Vector& v) {
    Vector hv = quartic_hvp(x, v);
    if (coupling != 0.0) {
      const double s = v.sum();
      hv.array() += coupling * (s - v.array());
    }
    return hv;
  };
  p.ell = 12.0 * kBox * kBox - 2.0 + std::abs(coupling) * (d - 1);
  p.rho = 24.0 * kBox;
  // sum_{i<j} x_i x_j lies in [-|x|^2/2, (d-1)|x|^2/2], so f >= sum_i (x_i^4 - a x_i^2)
  // and t^4 - a t^2 >= -a^2/4.
  const double a = 1.0 + std::max(0.5 * coupling, -0.5 * coupling * (d - 1));
  p.f_lower = -0.25 * d * a * a;
  p.delta_f = -*p.f_lower;
  return p;
}

Problem make_rosenbrock(int d) {
  require(d >= 2, "rosenbrock needs d >= 2");
  Problem p;
  p.name = "rosenbrock";
  p.dim = d;
  p.value = [](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double t = x[i + 1] - x[i] * x[i];
      const double u = 1.0 - x[i];
      f += 100.0 * t * t + u * u;
    }
    return f;
  };
  p.gradient = [](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double t = x[i + 1] - x[i] * x[i];
      g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
      g[i + 1] += 200.0 * t;
    }
    return g;
  };
  p.hessian_vector = [](const Vector& x, const Vector& v) {
    const Eigen::Index n = x.size();
    Vector hv = Vector::Zero(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const double diag = 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
      const double off = -400.0 * x[i];
      hv[i] += diag * v[i] + off * v[i + 1];
      hv[i + 1] += 200.0 * v[i + 1] + off * v[i];
    }
    return hv;
  };
  // Gershgorin bound on the box.
  double ell = 0.0;
  for (int i = 0; i < d; ++i) {
    double row = 0.0;
    if (i + 1 < d) row += 1200.0 * kBox * kBox + 400.0 * kBox + 2.0 + 400.0 * kBox;
    if (i > 0) row += 200.0 + 400.0 * kBox;
    ell = std::max(ell, row);
  }
  p.ell = ell;
  // |D^3 f[v,v,v]| <= 2400 kBox sum|v_i|^3 + 1200 sum v_i^2 |v_{i+1}| <= 3600 + 1200.
  p.rho = 2400.0 * kBox + 1200.0;
  p.f_lower = 0.0;
  p.delta_f = 24.2;  // f(-1.2, 1, ..., 1)
  return p;
}

Problem make_random_quadratic(int d, const Vector& eigenvalues, std::uint64_t seed,
                              const Vector& b) {
  require(d >= 1, "random quadratic needs d >= 1");
  require(eigenvalues.size() == d, "eigenvalue vector length must equal d");
  require(b.size() == d, "linear term length must equal d");
  for (int i = 1; i < d; ++i) {
    require(eigenvalues[i - 1] <= eigenvalues[i], "eigenvalues must be sorted ascending");
  }

  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  Matrix a = q.transpose() * eigenvalues.asDiagonal() * q;
  a = 0.5 * (a + a.transpose()).eval();

  Problem p;
  p.name = "random_quadratic";
  p.dim = d;
  p.value = [a, b](const Vector& x) { return 0.5 * x.dot(a * x) - b.dot(x); };
  p.gradient = [a, b](const Vector& x) -> Vector { return a * x - b; };
  p.hessian_vector = [a](const Vector&, const Vector& v) -> Vector { return a * v; };
  p.ell = std::max(std::abs(eigenvalues.minCoeff()), std::abs(eigenvalues.maxCoeff()));
  p.rho = 0.0;
  p.exact_lambda_min = eigenvalues.minCoeff();
  if (eigenvalues.minCoeff() > 0.0) {
    p.f_lower = -0.5 * b.dot(a.ldlt().solve(b));
    p.delta_f = -*p.f_lower;
  }
  return p;
}

Problem make_random_quadratic(int d, const Vector& eigenvalues, std::uint64_t seed) {
  return make_random_quadratic(d, eigenvalues, seed, Vector::Zero(d));
}

Vector hvp_finite_difference(const Problem& p, const Vector& x, const Vector& v, double h) {
  require(h > 0.0, "finite-difference step must be positive");
  const double vn = v.norm();
  if (vn == 0.0) return Vector::Zero(v.size());
  const Vector u = v / vn;
  return (p.gradient(x + h * u) - p.gradient(x - h * u)) * (vn / (2.0 * h));
}

Vector stochastic_grad(NoisyGradModel& model, const Vector& x, int batch) {
  require(batch >= 1, "batch size must be >= 1");
  Vector g = model.base.gradient(x);
  const std::uint64_t call = model.calls++;
  if (model.sigma2 == 0.0) return g;

  const auto d = x.size();
  Rng rng(derive_seed(model.seed, call));
  std::normal_distribution<double> normal(0.0, std::sqrt(model.sigma2 / static_cast<double>(d)));
  Vector noise = Vector::Zero(d);
  for (int s = 0; s < batch; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) noise[i] += normal(rng);
  }
  return g + noise / static_cast<double>(batch);
}

Family parse_family(const std::string& name) {
  if (name == "separable_quartic" || name == "quartic") return Family::SeparableQuartic;
  if (name == "coupled_quartic") return Family::CoupledQuartic;
  if (name == "rosenbrock") return Family::Rosenbrock;
  if (name == "random_quadratic") return Family::RandomQuadratic;
  throw InvalidArgument("unknown problem family '" + name + "'");
}

std::string family_name(Family f) {
  switch (f) {
    case Family::SeparableQuartic: return "separable_quartic";
    case Family::CoupledQuartic: return "coupled_quartic";
    case Family::Rosenbrock: return "rosenbrock";
    case Family::RandomQuadratic: return "random_quadratic";
  }
  return "unknown";
}

Problem make_problem(Family family, int d, const FamilyParams& params) {
  Problem p;
  switch (family) {
    case Family::SeparableQuartic: p = make_separable_quartic(d); break;
    case Family::CoupledQuartic: p = make_coupled_quartic(d, params.coupling); break;
    case Family::Rosenbrock: p = make_rosenbrock(d); break;
    case Family::RandomQuadratic: {
      require(params.spectrum_min <= params.spectrum_max, "spectrum_min must be <= spectrum_max");
      Vector eig = Vector::LinSpaced(d, params.spectrum_min, params.spectrum_max);
      p = make_random_quadratic(d, eig, params.quadratic_seed);
      break;
    }
  }
  if (params.ell_override > 0.0) p.ell = params.ell_override;
  if (params.rho_override >= 0.0) p.rho = params.rho_override;
  return p;
}

StartKind parse_start(const std::string& name) {
  if (name == "standard") return StartKind::Standard;
  if (name == "origin") return StartKind::OriginSaddle;
  if (name == "index1") return StartKind::IndexOneSaddle;
  if (name == "rosenbrock_saddle") return StartKind::RosenbrockSaddle;
  if (name == "classic") return StartKind::RosenbrockClassic;
  if (name == "sphere") return StartKind::UnitSphere;
  throw InvalidArgument("unknown start '" + name + "'");
}

Vector rosenbrock_saddle(int d) {
  require(d >= 4, "rosenbrock saddle start needs d >= 4");
  // Pattern of the d = 10 saddle; the tail settles near 0.0102.
  Vector x = Vector::Constant(d, 0.0102);
  x[0] = -0.5554;
  x[1] = 0.3224;
  x[2] = 0.1152;
  x[3] = 0.0235;
  if (d > 4) x[4] = 0.0107;
  x[d - 2] = 0.0100;
  x[d - 1] = 1.0e-4;

  const Problem p = make_rosenbrock(d);
  for (int it = 0; it < 50; ++it) {
    const Vector g = p.gradient(x);
    if (g.norm() < 1e-13) break;
    Matrix h(d, d);
    for (int j = 0; j < d; ++j) h.col(j) = p.hvp(x, Vector::Unit(d, j));
    x -= h.fullPivLu().solve(g);
  }
  if (!(p.gradient(x).norm() < 1e-10)) {
    throw InvalidArgument("Newton refinement of the rosenbrock saddle did not converge for d=" +
                          std::to_string(d));
  }
  return x;
}

Vector make_start(Family family, StartKind kind, const Problem& p, double eps, Rng& rng) {
  const int d = p.dim;
  const double jitter = eps / (4.0 * p.ell);
  if (kind == StartKind::Standard) {
    switch (family) {
      case Family::SeparableQuartic:
      case Family::CoupledQuartic: kind = StartKind::OriginSaddle; break;
      case Family::Rosenbrock: kind = StartKind::RosenbrockClassic; break;
      case Family::RandomQuadratic: kind = StartKind::UnitSphere; break;
    }
  }
  switch (kind) {
    case StartKind::OriginSaddle: return sample_ball(jitter, d, rng);
    case StartKind::IndexOneSaddle: {
      require(family == Family::SeparableQuartic, "index1 start is defined for separable_quartic");
      Vector x(d);
      std::bernoulli_distribution coin;
      const double m = 1.0 / std::sqrt(2.0);
      x[0] = 0.0;
      for (int i = 1; i < d; ++i) x[i] = coin(rng) ? m : -m;
      return x + sample_ball(jitter, d, rng);
    }
    case StartKind::RosenbrockSaddle: {
      require(family == Family::Rosenbrock, "rosenbrock_saddle start needs rosenbrock");
      return rosenbrock_saddle(d) + sample_ball(jitter, d, rng);
    }
    case StartKind::RosenbrockClassic: {
      Vector x = Vector::Ones(d);
      x[0] = -1.2;
      return x;
    }
    case StartKind::UnitSphere: return sample_sphere(d, rng);
    case StartKind::Standard: break;
  }
  throw InvalidArgument("unsupported start kind");
}

}  // namespace escape
