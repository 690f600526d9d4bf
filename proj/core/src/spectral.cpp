#include "degenheat/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "degenheat/error.hpp"

namespace degenheat::spectral {

using numerics::ChebyshevBasis;
using numerics::Grid;
using numerics::SampledField;

namespace {

// Gauss-Jacobi rule on [0,1] for the weight x^a (1-x)^c.
numerics::Rule unit_jacobi(std::size_t n, double a, double c) {
  numerics::Rule r = numerics::gauss_jacobi(n, c, a);
  const double scale = std::pow(2.0, -(a + c + 1.0));
  for (std::size_t q = 0; q < r.size(); ++q) {
    r.x[q] = 0.5 * (1.0 + r.x[q]);
    r.w[q] *= scale;
  }
  return r;
}

Eigen::MatrixXd diff_matrix(const ChebyshevBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      basis.diff_matrix().data(), n, n);
}

}  // namespace

// ---------------------------------------------------------------- stationary density

double StationaryDensity::smooth_part(double x) const { return std::exp(drift.selection_integral(x)); }

double StationaryDensity::operator()(double x) const {
  if (x < 0.0 || x > 1.0) return 0.0;
  return std::pow(x, b0 - 1.0) * std::pow(1.0 - x, b1 - 1.0) * smooth_part(x) / norm;
}

SampledField StationaryDensity::sample(const Grid& grid) const {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = (*this)(grid[i]);
  return SampledField(grid, std::move(v));
}

double StationaryDensity::flux_residual(double x) const {
  const double h = 1e-3 * std::min(x, 1.0 - x);
  auto flux = [this](double y) { return y * (1.0 - y) * (*this)(y); };
  const double d = (flux(x - 2 * h) - 8 * flux(x - h) + 8 * flux(x + h) - flux(x + 2 * h)) / (12 * h);
  return d - drift(x) * (*this)(x);
}

StationaryDensity stationary_density(const wf::DriftSpec& d) {
  require(d.b0() > 0.0 && d.b1() > 0.0, ErrorKind::domain,
          "stationary_density: needs b0 > 0 and b1 > 0; with an absorbing end use absorption_weights");
  StationaryDensity s{d, d.b0(), d.b1(), 1.0};
  const numerics::Rule r = unit_jacobi(80, s.b0 - 1.0, s.b1 - 1.0);
  double z = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) z += r.w[q] * s.smooth_part(r.x[q]);
  s.norm = z;
  return s;
}

// ---------------------------------------------------------------- harmonic functions

double Harmonic::derivative(double x) const {
  const double e = std::exp(-drift.selection_integral(x));
  switch (kind) {
    case HarmonicKind::two_sided: return e / norm;
    case HarmonicKind::left_only: return std::pow(1.0 - x, -drift.b1()) * e;
    case HarmonicKind::right_only: return std::pow(x, -drift.b0()) * e / norm;
  }
  return 0.0;
}

double Harmonic::operator()(double x) const {
  require(x >= 0.0 && x <= 1.0, ErrorKind::domain, "harmonic: x must lie in [0,1]");
  auto integrate = [this](double a, double b, bool grade_left, bool grade_right) {
    if (!(b > a)) return 0.0;
    const numerics::Rule r = numerics::graded_rule(a, b, 20, grade_left, grade_right, 40, 0.2);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) s += r.w[q] * derivative(r.x[q]);
    return s;
  };
  switch (kind) {
    case HarmonicKind::two_sided: return integrate(0.0, x, false, false);
    case HarmonicKind::left_only:
      if (x == 1.0 && drift.b1() >= 1.0) return INFINITY;
      return integrate(0.0, x, false, x > 0.9);
    case HarmonicKind::right_only:
      if (x == 0.0 && drift.b0() >= 1.0) return -INFINITY;
      return 1.0 - integrate(x, 1.0, x < 0.1, false);
  }
  return 0.0;
}

Harmonic harmonic(const wf::DriftSpec& d) {
  Harmonic h{d, HarmonicKind::two_sided, 1.0};
  if (d.b0() == 0.0 && d.b1() == 0.0) {
    const numerics::Rule r = numerics::gauss_legendre(64, 0.0, 1.0);
    double z = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) z += r.w[q] * std::exp(-d.selection_integral(r.x[q]));
    h.norm = z;
  } else if (d.b0() == 0.0) {
    h.kind = HarmonicKind::left_only;
  } else if (d.b1() == 0.0) {
    h.kind = HarmonicKind::right_only;
    h.norm = std::exp(-d.selection_integral(1.0));
  } else {
    fail(ErrorKind::domain, "harmonic: b0 > 0 and b1 > 0 leave only constants in the null space");
  }
  return h;
}

SampledField harmonic_u0(const wf::DriftSpec& d, const Grid& grid) {
  require(d.b0() == 0.0 && d.b1() == 0.0, ErrorKind::domain,
          "harmonic_u0: needs b0 = b1 = 0; use harmonic() for the one-sided variants");
  const Harmonic h = harmonic(d);
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = h(grid[i]);
  return SampledField(grid, std::move(v), 2);
}

// ---------------------------------------------------------------- absorption

namespace {

AbsorptionWeights weights_of(const wf::SolutionMeasure& m) {
  return {m.atom0, m.atom1, m.mass() - m.atom0 - m.atom1};
}

void require_absorbing(const wf::DriftSpec& d) {
  require(d.b0() == 0.0 || d.b1() == 0.0, ErrorKind::domain,
          "absorption_weights: both ends are reflecting (b0 > 0 and b1 > 0); there are no atoms");
}

}  // namespace

AbsorptionWeights absorption_weights(const wf::DriftSpec& d, double x, double t, wf::SolverOptions opt) {
  require_absorbing(d);
  return weights_of(wf::solve_forward_point(d, x, t, opt));
}

AbsorptionWeights absorption_weights(const wf::DriftSpec& d, const numerics::Function& g, double t,
                                     std::span<const double> breaks, wf::SolverOptions opt) {
  require_absorbing(d);
  return weights_of(wf::solve_forward(d, g, t, breaks, opt));
}

// ---------------------------------------------------------------- polynomial spectrum

PolynomialSpectrum polynomial_spectrum(const wf::DriftSpec& d, int n_max) {
  require(d.is_linear(), ErrorKind::domain, "polynomial_spectrum: drift must be linear, b0 (1-x) - b1 x");
  require(n_max >= 0, ErrorKind::domain, "polynomial_spectrum: n_max must be >= 0");
  const double beta = d.b0() + d.b1();
  PolynomialSpectrum out;
  auto lam = [beta](int n) { return 0.0 - static_cast<double>(n) * (static_cast<double>(n) - 1.0 + beta); };
  for (int n = 0; n <= n_max; ++n) {
    out.lambda.push_back(lam(n));
    // L x^k = k(k-1+b0) x^{k-1} + lambda_k x^k; back-substitute from the leading coefficient
    std::vector<double> a(static_cast<std::size_t>(n) + 1, 0.0);
    a[static_cast<std::size_t>(n)] = 1.0;
    for (int k = n - 1; k >= 0; --k) {
      const double up = (k + 1.0) * (k + d.b0()) * a[static_cast<std::size_t>(k) + 1];
      const double gap = lam(k) - lam(n);
      if (gap == 0.0) {
        require(up == 0.0, ErrorKind::numerical, "polynomial_spectrum: defective eigenvalue");
        a[static_cast<std::size_t>(k)] = 0.0;
      } else {
        a[static_cast<std::size_t>(k)] = -up / gap;
      }
    }
    out.eigenvectors.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------- long-time behaviour

double long_time_limit(const wf::DriftSpec& d, const numerics::Function& f, double x) {
  if (d.b0() > 0.0 && d.b1() > 0.0) {
    const StationaryDensity v = stationary_density(d);
    const numerics::Rule r = unit_jacobi(80, v.b0 - 1.0, v.b1 - 1.0);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) s += r.w[q] * v.smooth_part(r.x[q]) * f(r.x[q]);
    return s / v.norm;
  }
  if (d.b0() == 0.0 && d.b1() == 0.0) {
    const double u = harmonic(d)(x);
    return f(0.0) * (1.0 - u) + f(1.0) * u;
  }
  return d.b0() == 0.0 ? f(0.0) : f(1.0);
}

namespace {

SpectralEstimate fit_window(const wf::DriftSpec& d, const numerics::Function& f, double t0, double t1,
                            const wf::SolverOptions& opt) {
  const int K = 12;
  const double dt = (t1 - t0) / (K - 1);
  const int m0 = std::max(1, static_cast<int>(std::ceil(t0 / dt - 1e-9)));
  wf::Propagator prop(d, dt, opt);
  const auto& y = prop.basis().nodes();
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd u(n), lim(n);
  double fnorm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    u[i] = f(y[static_cast<std::size_t>(i)]);
    lim[i] = long_time_limit(d, f, y[static_cast<std::size_t>(i)]);
    fnorm = std::max(fnorm, std::abs(u[i]));
  }
  for (int k = 0; k < m0; ++k) u = prop.matrix() * u;

  SpectralEstimate e;
  e.t_start = m0 * dt;
  e.t_end = e.t_start + (K - 1) * dt;
  const double floor = 1e-11 * std::max(1.0, fnorm);
  for (int k = 0; k < K; ++k) {
    if (k > 0) u = prop.matrix() * u;
    const double dist = (u - lim).cwiseAbs().maxCoeff();
    if (dist > floor) {
      e.times.push_back(e.t_start + k * dt);
      e.distances.push_back(dist);
    }
  }
  if (e.times.empty())
    fail(ErrorKind::numerical, "spectral_gap_estimate: no decay detected; the probe lies in the null space");
  if (e.times.size() < 3)
    fail(ErrorKind::numerical, "spectral_gap_estimate: decay too fast to resolve in the window; shorten it");
  // least squares for log dist = c + lambda t
  double st = 0, sl = 0, stt = 0, stl = 0;
  const double cnt = static_cast<double>(e.times.size());
  for (std::size_t k = 0; k < e.times.size(); ++k) {
    const double t = e.times[k], l = std::log(e.distances[k]);
    st += t; sl += l; stt += t * t; stl += t * l;
  }
  e.lambda1 = (cnt * stl - st * sl) / (cnt * stt - st * st);
  const double c = (sl - e.lambda1 * st) / cnt;
  double ss = 0.0;
  for (std::size_t k = 0; k < e.times.size(); ++k) {
    const double r = std::log(e.distances[k]) - c - e.lambda1 * e.times[k];
    ss += r * r;
  }
  e.residual = std::sqrt(ss / cnt);
  if (!(e.lambda1 < 0.0))
    fail(ErrorKind::numerical, "spectral_gap_estimate: fitted rate is not negative; the distance does not decay");
  return e;
}

}  // namespace

SpectralEstimate spectral_gap_estimate(const wf::DriftSpec& d, const numerics::Function& f, double t_start,
                                       double t_end, wf::SolverOptions opt) {
  require(t_start >= 0.0 && t_end > t_start, ErrorKind::domain, "spectral_gap_estimate: need 0 <= t_start < t_end");
  SpectralEstimate e = fit_window(d, f, t_start, t_end, opt);
  // move the window past the faster modes until the guess settles
  for (int it = 0; it < 4; ++it) {
    const double start = std::max(t_start, 3.0 / std::abs(e.lambda1));
    const double len = std::max(t_end - t_start, 3.0 / std::abs(e.lambda1));
    const double previous = e.lambda1;
    e = fit_window(d, f, start, start + len, opt);
    if (std::abs(e.lambda1 - previous) <= 0.02 * std::abs(previous)) break;
  }
  return e;
}

// ---------------------------------------------------------------- resolvent

ResolventResult resolvent_apply(const wf::DriftSpec& d, double lambda, const numerics::Function& f, const Grid& out,
                                wf::SolverOptions opt) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::domain, "resolvent_apply: lambda must be > 0");
  ChebyshevBasis basis(static_cast<std::size_t>(opt.degree), 0.0, 1.0);
  const auto& y = basis.nodes();
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd f0(n);
  for (Eigen::Index i = 0; i < n; ++i) f0[i] = f(y[static_cast<std::size_t>(i)]);
  const double fnorm = f0.cwiseAbs().maxCoeff();

  ResolventResult res{SampledField(out, std::vector<double>(out.size(), 0.0)), 0.0, 0.0, {}, {}};
  res.horizon = (27.6 + std::log(std::max(1.0, fnorm))) / lambda;
  const double tau = wf::step_size(1.0, opt.tau_max);
  const int N = wf::solver_terms(d, tau, res.horizon, opt.tol, opt);
  Eigen::MatrixXd Q = wf::StepOperator::get(d, tau, N, opt)->matrix();

  // Simpson blocks on a step that doubles once the fast modes have decayed
  const int block = 128;
  const double h_max = 0.05 / (lambda + 1.0);
  double h = tau, t = 0.0;
  Eigen::VectorXd u = f0, w = Eigen::VectorXd::Zero(n);
  while (t < res.horizon) {
    w += (h / 3.0) * std::exp(-lambda * t) * u;
    for (int k = 1; k <= block; ++k) {
      u = Q * u;
      const double wk = (k == block) ? 1.0 : ((k % 2) ? 4.0 : 2.0);
      w += (h / 3.0) * wk * std::exp(-lambda * (t + k * h)) * u;
    }
    t += block * h;
    if (2.0 * h <= h_max) {
      Q = (Q * Q).eval();
      h *= 2.0;
    }
  }

  const Eigen::MatrixXd D = diff_matrix(basis);
  const Eigen::VectorXd w1 = D * w, w2 = D * w1;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double x = y[static_cast<std::size_t>(i)];
    const double Lw = x * (1.0 - x) * w2[i] + d(x) * w1[i];
    res.residual = std::max(res.residual, std::abs(lambda * w[i] - Lw - f0[i]));
  }
  Eigen::VectorXd fd = f0, wd = w;
  for (int m = 0; m <= 2; ++m) {
    res.f_norms.push_back(fd.cwiseAbs().maxCoeff());
    res.w_norms.push_back(wd.cwiseAbs().maxCoeff());
    fd = (D * fd).eval();
    wd = (D * wd).eval();
  }
  std::vector<double> wv(w.data(), w.data() + w.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(out[i] >= 0.0 && out[i] <= 1.0, ErrorKind::domain, "resolvent_apply: output grid must lie in [0,1]");
    res.w.values[i] = basis.evaluate(wv, out[i]);
  }
  return res;
}

}  // namespace degenheat::spectral
