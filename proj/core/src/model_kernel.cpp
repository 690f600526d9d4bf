#include "degenheat/model_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "degenheat/error.hpp"
#include "degenheat/specfun.hpp"

namespace degenheat::model {

using numerics::Grid;
using numerics::SampledField;

ModelKernel::ModelKernel(double b_, double t_) : b(b_), t(t_) {
  require(b >= 0.0 && std::isfinite(b), ErrorKind::domain, "model kernel: b must be >= 0");
  require(t > 0.0 && std::isfinite(t), ErrorKind::domain, "model kernel: t must be > 0");
}

namespace {

// y^{b-1} t^{-b} e^{-(sqrt x - sqrt y)^2 / t} e^{-2 sqrt(xy)/t} psi_b(xy/t^2), without the y^{b-1}.
double regular_part(double b, double t, double x, double y) {
  const double d = std::sqrt(x) - std::sqrt(y);
  const double e = -b * std::log(t) - d * d / t;
  if (e < -745.0) return 0.0;
  return std::exp(e) * specfun::psi_scaled(b, x * y / (t * t));
}

}  // namespace

double k_model(const ModelKernel& k, double x, double y) {
  require(k.b > 0.0, ErrorKind::domain, "k_model: b = 0 goes through k_dirichlet0 plus the atom");
  require(x >= 0.0 && y >= 0.0, ErrorKind::domain, "k_model: x, y must be >= 0");
  if (y == 0.0) {
    if (k.b < 1.0) return INFINITY;
    if (k.b > 1.0) return 0.0;
  }
  return std::pow(y, k.b - 1.0) * regular_part(k.b, k.t, x, y);
}

double k_dirichlet0(double t, double x, double y) {
  require(t > 0.0, ErrorKind::domain, "k_dirichlet0: t must be > 0");
  require(x >= 0.0 && y >= 0.0, ErrorKind::domain, "k_dirichlet0: x, y must be >= 0");
  if (x == 0.0) return 0.0;
  return x * regular_part(2.0, t, x, y);
}

double k_density(double b, double t, double x, double y) {
  return b == 0.0 ? k_dirichlet0(t, x, y) : k_model(ModelKernel(b, t), x, y);
}

double k_atom(double b, double t, double x) { return b == 0.0 ? std::exp(-x / t) : 0.0; }

std::pair<double, double> kernel_window(double b, double t, double x) {
  const double s_hi = std::sqrt(x) + std::sqrt(t * (50.0 + 4.0 * b));
  const double hi = s_hi * s_hi;
  const double s_lo = std::sqrt(x) - std::sqrt(50.0 * t);
  const double lo = s_lo > 0.0 ? s_lo * s_lo : 0.0;
  return {lo, hi};
}

KernelRule kernel_rule(double b, double t, double x, const KernelRuleOptions& opt) {
  require(b >= 0.0 && t > 0.0 && x >= 0.0, ErrorKind::domain, "kernel_rule: need b >= 0, t > 0, x >= 0");
  KernelRule r;
  r.atom = k_atom(b, t, x);
  auto [ylo, yhi] = kernel_window(b, t, x);
  yhi = std::min(yhi, opt.upper);
  if (!(yhi > ylo)) return r;

  const double slo = std::sqrt(ylo), shi = std::sqrt(yhi);
  const double ds = std::min(opt.panel_width * std::sqrt(t), opt.max_panel);
  std::vector<double> edges;
  const int npan = std::max(1, static_cast<int>(std::ceil((shi - slo) / ds)));
  for (int k = 0; k <= npan; ++k) edges.push_back(slo + (shi - slo) * k / npan);
  for (double yb : opt.breaks)
    if (yb > ylo && yb < yhi) edges.push_back(std::sqrt(yb));
  std::sort(edges.begin(), edges.end());

  const std::size_t n = static_cast<std::size_t>(opt.points_per_panel);
  static thread_local std::map<std::size_t, numerics::Rule> gl_cache;
  auto it = gl_cache.find(n);
  if (it == gl_cache.end()) it = gl_cache.emplace(n, numerics::gauss_legendre(n)).first;
  const numerics::Rule& gl = it->second;

  r.y.reserve(edges.size() * n);
  r.w.reserve(edges.size() * n);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double sa = edges[p], sb = edges[p + 1];
    if (!(sb > sa)) continue;
    if (sa == 0.0 && b > 0.0) {
      // weight s^{2b-1} from y^{b-1} dy = 2 s^{2b-1} ds
      numerics::Rule gj = numerics::gauss_jacobi_left(n, 2.0 * b - 1.0, sb);
      for (std::size_t q = 0; q < n; ++q) {
        const double s = gj.x[q], y = s * s;
        r.y.push_back(y);
        r.w.push_back(2.0 * gj.w[q] * regular_part(b, t, x, y));
      }
      continue;
    }
    const double c = 0.5 * (sa + sb), h = 0.5 * (sb - sa);
    for (std::size_t q = 0; q < n; ++q) {
      const double s = c + h * gl.x[q], y = s * s;
      const double kv = b == 0.0 ? x * regular_part(2.0, t, x, y) : std::pow(y, b - 1.0) * regular_part(b, t, x, y);
      r.y.push_back(y);
      r.w.push_back(h * gl.w[q] * 2.0 * s * kv);
    }
  }
  return r;
}

namespace {

bool compact_tail(const SampledField& f) {
  const std::size_t n = f.values.size();
  for (std::size_t i = n - 8; i < n; ++i)
    if (f.values[i] != 0.0) return false;
  return true;
}

std::vector<std::size_t> admissible_nodes(double b, double t, const SampledField& f) {
  const bool compact = compact_tail(f);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    if (compact || kernel_window(b, t, f.grid[i]).second <= f.grid.back()) idx.push_back(i);
  }
  require(idx.size() >= 8, ErrorKind::domain,
          "apply_kernel: data grid too short for the kernel window; extend the grid or use compact data");
  return idx;
}

Grid subgrid(const Grid& g, const std::vector<std::size_t>& idx) {
  std::vector<double> x;
  x.reserve(idx.size());
  for (auto i : idx) x.push_back(g[i]);
  return Grid(std::move(x), g.domain());
}

}  // namespace

HalfLineSolution apply_kernel(const ModelKernel& k, const SampledField& f) {
  const auto idx = admissible_nodes(k.b, k.t, f);
  const double upper = f.grid.back();
  const double f0 = f.values.front();
  require(f.grid.front() == 0.0, ErrorKind::domain, "apply_kernel: data grid must start at 0");
  std::vector<double> u(idx.size()), atoms(idx.size(), 0.0);
  KernelRuleOptions opt;
  opt.upper = upper;
  for (std::size_t m = 0; m < idx.size(); ++m) {
    const double x = f.grid[idx[m]];
    KernelRule r = kernel_rule(k.b, k.t, x, opt);
    double s = r.atom * f0;
    for (std::size_t q = 0; q < r.y.size(); ++q) s += r.w[q] * numerics::interpolate(f, std::min(r.y[q], upper));
    u[m] = s;
    atoms[m] = r.atom;
  }
  return {SampledField(subgrid(f.grid, idx), std::move(u), f.smoothness), std::move(atoms)};
}

HalfLineSolution apply_kernel(const ModelKernel& k, const numerics::Function& f, const Grid& out) {
  std::vector<double> u(out.size()), atoms(out.size(), 0.0);
  const double f0 = k.b == 0.0 ? f(0.0) : 0.0;
  for (std::size_t m = 0; m < out.size(); ++m) {
    KernelRule r = kernel_rule(k.b, k.t, out[m]);
    double s = r.atom * f0;
    for (std::size_t q = 0; q < r.y.size(); ++q) s += r.w[q] * f(r.y[q]);
    u[m] = s;
    atoms[m] = r.atom;
  }
  return {SampledField(out, std::move(u)), std::move(atoms)};
}

double Poly::operator()(double x) const {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
  return s;
}

Poly Poly::derivative() const {
  Poly d;
  for (std::size_t j = 1; j < c.size(); ++j) d.c.push_back(static_cast<double>(j) * c[j]);
  if (d.c.empty()) d.c.push_back(0.0);
  return d;
}

Poly apply_model_operator(double b, const Poly& p) {
  Poly out;
  out.c.assign(std::max<std::size_t>(p.c.size(), 1), 0.0);
  for (std::size_t j = 1; j < p.c.size(); ++j) {
    const double jj = static_cast<double>(j);
    out.c[j - 1] += jj * (jj - 1.0 + b) * p.c[j];
  }
  return out;
}

Poly exp_poly(double b, double t, const Poly& p) {
  Poly sum = p;
  if (sum.c.empty()) sum.c.push_back(0.0);
  Poly term = p;
  double coef = 1.0;
  for (std::size_t l = 1; l <= p.degree(); ++l) {
    term = apply_model_operator(b, term);
    coef *= t / static_cast<double>(l);
    for (std::size_t j = 0; j < term.c.size(); ++j) sum.c[j] += coef * term.c[j];
  }
  return sum;
}

SampledField derivative_transfer(const ModelKernel& k, const SampledField& f, int j) {
  require(j >= 0, ErrorKind::domain, "derivative_transfer: j must be >= 0");
  require(j <= f.smoothness, ErrorKind::domain, "derivative_transfer: j exceeds the data smoothness class");
  numerics::LocalLagrange interp(f.grid.nodes(), 7);
  auto dj = [&](double y) {
    double w[8];
    const std::size_t s = interp.weights(y, j, w);
    double v = 0.0;
    for (int a = 0; a < 8; ++a) v += w[a] * f.values[s + static_cast<std::size_t>(a)];
    return v;
  };
  const double bj = k.b + j;
  const auto idx = admissible_nodes(bj, k.t, f);
  std::vector<double> u(idx.size());
  KernelRuleOptions opt;
  opt.upper = f.grid.back();
  for (std::size_t m = 0; m < idx.size(); ++m) {
    KernelRule r = kernel_rule(bj, k.t, f.grid[idx[m]], opt);
    double s = r.atom * dj(0.0);
    for (std::size_t q = 0; q < r.y.size(); ++q) s += r.w[q] * dj(r.y[q]);
    u[m] = s;
  }
  return SampledField(subgrid(f.grid, idx), std::move(u), std::max(0, f.smoothness - j));
}

SampledField derivative_transfer(const ModelKernel& k, const numerics::Function& dj_f, int j, const Grid& out) {
  require(j >= 0, ErrorKind::domain, "derivative_transfer: j must be >= 0");
  return apply_kernel(ModelKernel(k.b + j, k.t), dj_f, out).field;
}

SampledField duhamel(double b, const SpaceTimeFunction& g, double T, double t, const Grid& out) {
  require(t <= T * (1.0 + 1e-14), ErrorKind::domain, "duhamel: t beyond the time window of g");
  require(t >= 0.0, ErrorKind::domain, "duhamel: t must be >= 0");
  std::vector<double> u(out.size(), 0.0);
  if (t == 0.0) return SampledField(out, std::move(u));
  for (std::size_t m = 0; m < out.size(); ++m) {
    const double x = out[m];
    auto inner = [&](double s) {
      const double lag = t - s;
      if (lag <= 0.0) return g(x, t);
      KernelRule r = kernel_rule(b, lag, x);
      double v = r.atom * (r.atom > 0.0 ? g(0.0, s) : 0.0);
      for (std::size_t q = 0; q < r.y.size(); ++q) v += r.w[q] * g(r.y[q], s);
      return v;
    };
    // panels graded toward s = t where the kernel concentrates
    double total = 0.0, a = 0.0;
    for (int k = 1; k <= 12; ++k) {
      const double bnd = t - t * std::pow(0.25, k);
      total += numerics::integrate_adaptive(inner, a, bnd, 1e-13, 1e-11, 30);
      a = bnd;
    }
    total += numerics::integrate_adaptive(inner, a, t, 1e-13, 1e-11, 30);
    u[m] = total;
  }
  return SampledField(out, std::move(u));
}

namespace {

// int |d_z k_1^b(lambda, y)| dy where d_z k^b_s = (k^{b+1}_s - k^b_s)/s.
double grad_l1(double b, double lambda) {
  KernelRule r = kernel_rule(b, 1.0, lambda, {.points_per_panel = 20, .panel_width = 0.5});
  double s = r.atom;  // for b = 0 the atom contributes |-k^0 atom|
  for (std::size_t q = 0; q < r.y.size(); ++q) {
    const double y = r.y[q], z = lambda * y;
    const double pb = specfun::psi_scaled(b, z);
    if (pb <= 0.0 || r.w[q] == 0.0) continue;
    const double ratio = b == 0.0 ? specfun::psi_scaled(1.0, z) / (lambda * specfun::psi_scaled(2.0, z))
                                  : y * specfun::psi_scaled(b + 1.0, z) / pb;
    s += r.w[q] * std::abs(ratio - 1.0);
  }
  return s;
}

}  // namespace

double gradient_constant(double b) {
  require(b >= 0.0, ErrorKind::domain, "gradient_constant: b must be >= 0");
  static std::mutex mu;
  static std::map<double, double> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(b);
    if (it != cache.end()) return it->second;
  }
  double best = b == 0.0 ? 0.0 : grad_l1(b, 0.0);
  for (int k = 0; k <= 120; ++k) {
    const double lambda = std::pow(10.0, -6.0 + 0.1 * k);
    best = std::max(best, (1.0 + std::sqrt(lambda)) * grad_l1(b, lambda));
  }
  std::lock_guard<std::mutex> lock(mu);
  cache[b] = best;
  return best;
}

GradBound grad_bound_check(double b, double t, const numerics::Function& f, double z_max, int resolution,
                           double f_upper, std::span<const double> f_breaks) {
  require(t > 0.0 && z_max > 0.0 && resolution >= 4, ErrorKind::domain,
          "grad_bound_check: need t > 0, a positive window and resolution >= 4");
  double fnorm = 0.0;
  const double probe = std::isfinite(f_upper) ? f_upper : z_max + kernel_window(b + 1.0, t, z_max).second;
  for (int i = 0; i <= 20 * resolution; ++i) fnorm = std::max(fnorm, std::abs(f(probe * i / (20.0 * resolution))));
  GradBound out;
  out.fitted_C_b = gradient_constant(b);
  if (fnorm == 0.0) return out;
  KernelRuleOptions opt;
  opt.upper = f_upper;
  opt.breaks = f_breaks;
  const double f0 = f(0.0);
  const int ns = resolution / 4;
  for (int is = 0; is <= ns; ++is) {
    const double s = t * std::pow(10.0, -4.0 + 4.0 * is / ns);
    for (int iz = 0; iz <= resolution; ++iz) {
      const double z = z_max * iz / resolution;
      KernelRule r0 = kernel_rule(b, s, z, opt);
      KernelRule r1 = kernel_rule(b + 1.0, s, z, opt);
      double u0 = r0.atom * f0, u1 = 0.0;
      for (std::size_t q = 0; q < r0.y.size(); ++q) u0 += r0.w[q] * f(r0.y[q]);
      for (std::size_t q = 0; q < r1.y.size(); ++q) u1 += r1.w[q] * f(r1.y[q]);
      const double grad = (u1 - u0) / s;
      out.measured_sup = std::max(out.measured_sup, std::abs(grad) * (s + std::sqrt(z * s)) / fnorm);
    }
  }
  return out;
}

}  // namespace degenheat::model
