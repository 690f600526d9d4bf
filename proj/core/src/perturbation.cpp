#include "degenheat/perturbation.hpp"

#include <algorithm>
#include <cmath>

#include "degenheat/error.hpp"

namespace degenheat::perturbation {

using numerics::Grid;
using numerics::SampledField;

PerturbationField PerturbationField::make(numerics::Function h, double support) {
  require(support > 0.0, ErrorKind::domain, "perturbation field: support must be > 0");
  PerturbationField p;
  p.h = std::move(h);
  p.support = support;
  const int n = 4000;
  for (int i = 0; i <= n; ++i) {
    const double v = std::abs(p.h(support * i / n));
    require(std::isfinite(v), ErrorKind::numerical, "perturbation field: h is not finite");
    p.sup_norm = std::max(p.sup_norm, v);
  }
  return p;
}

PerturbationField PerturbationField::zero() {
  PerturbationField p;
  p.h = [](double) { return 0.0; };
  p.support = 0.0;
  return p;
}

SpaceTimeField::SpaceTimeField(Grid g, std::vector<double> t, std::vector<double> v)
    : grid(std::move(g)), times(std::move(t)), values(std::move(v)) {
  require(!times.empty() && times.front() == 0.0, ErrorKind::domain, "space-time field: times must start at 0");
  require(std::is_sorted(times.begin(), times.end()) && times.back() > 0.0, ErrorKind::domain,
          "space-time field: times must increase to T > 0");
  require(values.size() == grid.size() * times.size(), ErrorKind::domain, "space-time field: size mismatch");
  for (double v : values) require(std::isfinite(v), ErrorKind::numerical, "space-time field: non-finite value");
}

SpaceTimeField SpaceTimeField::sample(const Grid& grid, std::vector<double> times, const model::SpaceTimeFunction& g) {
  std::vector<double> v;
  v.reserve(grid.size() * times.size());
  for (double s : times)
    for (double z : grid.nodes()) v.push_back(g(z, s));
  return SpaceTimeField(grid, std::move(times), std::move(v));
}

SampledField SpaceTimeField::slice(std::size_t k) const {
  const std::size_t M = grid.size();
  return SampledField(grid, std::vector<double>(values.begin() + k * M, values.begin() + (k + 1) * M));
}

std::vector<double> sqrt_time_nodes(double T, int count) {
  require(T > 0.0 && count >= 2, ErrorKind::domain, "time nodes: need T > 0 and at least two nodes");
  auto r = numerics::chebyshev_lobatto(static_cast<std::size_t>(count - 1), 0.0, std::sqrt(T));
  std::vector<double> s(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) s[k] = r[k] * r[k];
  s.front() = 0.0;
  s.back() = T;
  return s;
}

NeumannOperator::NeumannOperator(double b, PerturbationField h, Grid grid, std::vector<double> times,
                                 NeumannOptions opt)
    : b_(b),
      h_(std::move(h)),
      grid_(std::move(grid)),
      times_(std::move(times)),
      opt_(opt),
      space_(grid_.nodes(), opt.interp_degree) {
  require(b >= 0.0, ErrorKind::domain, "neumann operator: b must be >= 0");
  require(grid_.front() == 0.0, ErrorKind::domain, "neumann operator: grid must start at 0");
  require(times_.size() >= 2 && times_.front() == 0.0, ErrorKind::domain,
          "neumann operator: time nodes must start at 0");
  const auto d = space_.diff_matrix(1);
  const std::size_t M = grid_.size();
  dx_.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) dx_(i, j) = d[i * M + j];
}

Eigen::MatrixXd NeumannOperator::rows(std::span<const double> x, double s) const {
  const std::size_t M = grid_.size(), K = times_.size();
  require(s >= 0.0 && s <= times_.back() * (1.0 + 1e-12), ErrorKind::domain,
          "apply_A: requested time lies beyond the time window of g");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(M * K));
  if (s == 0.0 || h_.support <= 0.0) return R;

  std::vector<double> rnodes(K);
  for (std::size_t k = 0; k < K; ++k) rnodes[k] = std::sqrt(times_[k]);
  const numerics::Rule gl = numerics::gauss_legendre(static_cast<std::size_t>(opt_.sigma_points), 0.0, 1.0);
  std::vector<std::vector<double>> tw(gl.size());
  for (std::size_t q = 0; q < gl.size(); ++q)
    tw[q] = numerics::fornberg_weights(std::sqrt(s) * gl.x[q], rnodes, 0)[0];

  model::KernelRuleOptions kopt;
  kopt.upper = std::min(grid_.back(), h_.support);
  kopt.panel_width = opt_.panel_width;
  kopt.points_per_panel = opt_.points_per_panel;
  kopt.max_panel = opt_.max_panel;
  const int deg = opt_.interp_degree;
  std::vector<double> sw(static_cast<std::size_t>(deg + 1));

  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t q = 0; q < gl.size(); ++q) {
      const double v = gl.x[q];
      const double sigma = s * v * v, lag = s - sigma;
      const double wsig = 2.0 * s * v * gl.w[q];
      const model::KernelRule kr = model::kernel_rule(b_, lag, x[i], kopt);
      for (std::size_t p = 0; p < kr.y.size(); ++p) {
        const double z = kr.y[p];
        const double f = wsig * kr.w[p] * z * h_(z);
        if (f == 0.0) continue;
        const std::size_t i0 = space_.weights(z, 0, sw);
        for (std::size_t k = 0; k < K; ++k) {
          const double fk = f * tw[q][k];
          if (fk == 0.0) continue;
          double* row = R.row(static_cast<Eigen::Index>(i)).data() + k * M + i0;
          for (int l = 0; l <= deg; ++l) row[l] += fk * sw[static_cast<std::size_t>(l)];
        }
      }
    }
  }
  return R;
}

const Eigen::MatrixXd& NeumannOperator::matrix() const {
  if (built_) return full_;
  const std::size_t M = grid_.size(), K = times_.size();
  full_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M * K), static_cast<Eigen::Index>(M * K));
  for (std::size_t k = 1; k < K; ++k)
    full_.middleRows(static_cast<Eigen::Index>(k * M), static_cast<Eigen::Index>(M)) =
        rows(grid_.nodes(), times_[k]);
  built_ = true;
  return full_;
}

Eigen::MatrixXd NeumannOperator::gradient(const Eigen::MatrixXd& G) const {
  const auto M = static_cast<Eigen::Index>(grid_.size());
  Eigen::MatrixXd out(G.rows(), G.cols());
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(times_.size()); ++k)
    out.middleRows(k * M, M).noalias() = dx_ * G.middleRows(k * M, M);
  return out;
}

Eigen::MatrixXd NeumannOperator::interpolate(const Eigen::MatrixXd& G, std::span<const double> x,
                                             std::size_t k) const {
  const std::size_t M = grid_.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), G.cols());
  std::vector<double> sw(static_cast<std::size_t>(opt_.interp_degree + 1));
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] >= grid_.front() && x[i] <= grid_.back(), ErrorKind::domain,
            "neumann operator: interpolation point outside the grid");
    const std::size_t i0 = space_.weights(x[i], 0, sw);
    for (int l = 0; l <= opt_.interp_degree; ++l)
      out.row(static_cast<Eigen::Index>(i)) +=
          sw[static_cast<std::size_t>(l)] * G.row(static_cast<Eigen::Index>(k * M + i0 + static_cast<std::size_t>(l)));
  }
  return out;
}

namespace {

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SampledField as_field(const Grid& g, const Eigen::VectorXd& v, int smoothness) {
  return SampledField(g, std::vector<double>(v.data(), v.data() + v.size()), smoothness);
}

}  // namespace

SampledField apply_A(double b, const PerturbationField& h, const SpaceTimeField& g, double t) {
  require(t > 0.0 && t <= g.T() * (1.0 + 1e-12), ErrorKind::domain, "apply_A: t must lie in (0, T] of g");
  NeumannOperator op(b, h, g.grid, g.times);
  const Eigen::MatrixXd dG = op.gradient(as_vector(g.values));
  const Eigen::VectorXd out = op.rows(g.grid.nodes(), t) * dG;
  return as_field(g.grid, out, 0);
}

SampledField NeumannSeries::sum() const {
  SampledField s = iterates.front();
  for (std::size_t j = 1; j < iterates.size(); ++j)
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] += iterates[j].values[i];
  return s;
}

NeumannSeries neumann_series(double b, const PerturbationField& h, const SampledField& f, double t, int N,
                             NeumannOptions opt) {
  require(t > 0.0, ErrorKind::domain, "neumann_solve: t must be > 0");
  require(N >= 0, ErrorKind::domain, "neumann_solve: N must be >= 0");
  require(f.grid.front() == 0.0, ErrorKind::domain, "neumann_solve: data grid must start at 0");
  const Grid& grid = f.grid;
  const std::size_t M = grid.size();
  const auto times = sqrt_time_nodes(t, opt.time_nodes);
  const std::size_t K = times.size();

  const bool smooth = f.smoothness >= 1;
  numerics::LocalLagrange lag(grid.nodes(), opt.interp_degree);
  std::vector<double> fprime(M);
  {
    const auto d = lag.diff_matrix(1);
    for (std::size_t i = 0; i < M; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < M; ++j) s += d[i * M + j] * f.values[j];
      fprime[i] = s;
    }
  }
  const SampledField fp(grid, fprime, std::max(0, f.smoothness - 1));
  auto data = [&](const SampledField& fld, double y) {
    if (y > grid.back()) return 0.0;
    return smooth ? lag.evaluate(fld.values, y) : numerics::interpolate(fld, y);
  };

  model::KernelRuleOptions kopt;
  kopt.upper = grid.back();
  Eigen::MatrixXd G0(M * K, 1), D0(M * K, 1);
  for (std::size_t m = 0; m < M; ++m) {
    G0(static_cast<Eigen::Index>(m), 0) = f.values[m];
    D0(static_cast<Eigen::Index>(m), 0) = fprime[m];
  }
  for (std::size_t k = 1; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      const auto r = model::kernel_rule(b, times[k], grid[m], kopt);
      double g = r.atom * f.values.front();
      for (std::size_t q = 0; q < r.y.size(); ++q) g += r.w[q] * data(f, r.y[q]);
      G0(static_cast<Eigen::Index>(k * M + m), 0) = g;
      if (smooth) {
        const auto r1 = model::kernel_rule(b + 1.0, times[k], grid[m], kopt);
        double dg = 0.0;
        for (std::size_t q = 0; q < r1.y.size(); ++q) dg += r1.w[q] * data(fp, r1.y[q]);
        D0(static_cast<Eigen::Index>(k * M + m), 0) = dg;
      }
    }
  }

  NeumannOperator op(b, h, grid, times, opt);
  if (!smooth) D0 = op.gradient(G0);

  NeumannSeries out;
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t m = 0; m < M; ++m)
      out.M = std::max(out.M, std::sqrt(grid[m] * times[k]) * std::abs(D0(static_cast<Eigen::Index>(k * M + m), 0)));
  out.C_b = model::gradient_constant(b);

  auto final_slice = [&](const Eigen::MatrixXd& G) {
    return as_field(grid, G.block(static_cast<Eigen::Index>((K - 1) * M), 0, static_cast<Eigen::Index>(M), 1),
                    f.smoothness);
  };
  out.iterates.push_back(final_slice(G0));
  out.iterate_norms.push_back(out.iterates.back().sup_norm());

  BoundConstants bc;
  bc.M = out.M;
  bc.C_b = 2.0 * out.C_b;
  bc.L = h.support;
  bc.h_norms = {h.sup_norm};
  Eigen::MatrixXd G;
  for (int j = 1; j <= N; ++j) {
    G = op.apply_gradient(j == 1 ? D0 : op.gradient(G));
    out.iterates.push_back(final_slice(G));
    const double norm = out.iterates.back().sup_norm();
    out.iterate_norms.push_back(norm);
    const double bound = truncation_bound(j, bc, t);
    if (norm > 10.0 * bound + 1e-300)
      fail(ErrorKind::numerical, "neumann_solve: iterate " + std::to_string(j) + " has sup norm " +
                                     std::to_string(norm) + ", more than 10x its predicted bound " +
                                     std::to_string(bound) + "; the series is not converging");
  }
  return out;
}

SampledField neumann_solve(double b, const PerturbationField& h, const SampledField& f, double t, int N,
                           NeumannOptions opt) {
  return neumann_series(b, h, f, t, N, opt).sum();
}

double apply_A_concentrated(double b, const PerturbationField& h, const model::SpaceTimeFunction& dg, double y0,
                            double s, double x, int sigma_points) {
  require(s >= 0.0 && x >= 0.0 && y0 >= 0.0, ErrorKind::domain, "apply_A: need s, x, y0 >= 0");
  if (s == 0.0 || h.support <= 0.0) return 0.0;
  const numerics::Rule gl = numerics::gauss_legendre(static_cast<std::size_t>(sigma_points), 0.0, 1.0);
  const double sx = std::sqrt(x), sy = std::sqrt(y0), top = std::sqrt(h.support);
  double total = 0.0;
  for (std::size_t q = 0; q < gl.size(); ++q) {
    const double v = gl.x[q];
    const double sigma = s * v * v, lag = s - sigma;
    // both factors are Gaussian in sqrt(z); their product is centred at c with width om
    const double c = (sx * sigma + sy * lag) / s;
    const double om = std::sqrt(sigma * lag / s);
    const double lo = std::max(0.0, c - 8.5 * om), hi = std::min(top, c + 8.5 * om);
    if (!(hi > lo)) continue;
    numerics::Rule r;
    if (lo == 0.0) {
      r = numerics::graded_rule(0.0, hi, 12, true, false, 30, 0.15);
    } else {
      const int panels = 6;
      for (int p = 0; p < panels; ++p) {
        const auto g = numerics::gauss_legendre(12, lo + (hi - lo) * p / panels, lo + (hi - lo) * (p + 1) / panels);
        r.x.insert(r.x.end(), g.x.begin(), g.x.end());
        r.w.insert(r.w.end(), g.w.begin(), g.w.end());
      }
    }
    double inner = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) {
      const double u = r.x[p], z = u * u;
      const double hz = h(z);
      if (hz == 0.0) continue;
      inner += r.w[p] * 2.0 * u * model::k_density(b, lag, x, z) * z * hz * dg(z, sigma);
    }
    total += 2.0 * s * v * gl.w[q] * inner;
  }
  return total;
}

Eigen::MatrixXd neumann_iterates_concentrated(double b, const PerturbationField& h,
                                              const model::SpaceTimeFunction& dg, double y0, double t, int N,
                                              std::span<const double> x, std::vector<double> grid,
                                              NeumannOptions opt) {
  require(t > 0.0 && N >= 0, ErrorKind::domain, "neumann iterates: need t > 0 and N >= 0");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), N);
  if (N == 0) return out;
  for (std::size_t i = 0; i < x.size(); ++i)
    out(static_cast<Eigen::Index>(i), 0) = apply_A_concentrated(b, h, dg, y0, t, x[i], opt.sigma_points);
  if (N == 1) return out;

  if (grid.empty()) {
    double right = h.support;
    for (double xi : x) right = std::max(right, xi);
    const double du = std::min(0.01, std::sqrt(t) / 6.0);
    const double top = std::sqrt(right) + 8.0 * du;
    for (double u = 0.0; u < top + 0.5 * du; u += du) grid.push_back(u * u);
  }
  const Grid g(grid, numerics::Domain::half_line(grid.back()));
  const auto times = sqrt_time_nodes(t, opt.time_nodes);
  const std::size_t M = g.size(), K = times.size();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M * K), 1);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t m = 0; m < M; ++m)
      G(static_cast<Eigen::Index>(k * M + m), 0) = apply_A_concentrated(b, h, dg, y0, times[k], g[m], opt.sigma_points);
  NeumannOperator op(b, h, g, times, opt);
  for (int j = 2; j <= N; ++j) {
    G = op.apply_gradient(op.gradient(G));
    out.col(j - 1) = op.interpolate(G, x, K - 1).col(0);
  }
  return out;
}

double d_const(int j) {
  const double a = 0.5 * (j + 1);
  return std::pow(M_PI, a) / std::tgamma(a);
}

double D_const(int j) {
  double D = 1.0;
  for (int i = 1; i <= j; ++i) D = 2.0 * D * std::tgamma(0.5 * i) / std::tgamma(0.5 * (i + 1));
  return D;
}

double truncation_bound(int j, const BoundConstants& c, double t, int ell) {
  require(j >= 1, ErrorKind::domain, "truncation_bound: j must be >= 1");
  require(ell >= 0 && static_cast<std::size_t>(ell) < c.h_norms.size(), ErrorKind::domain,
          "truncation_bound: missing C^l norm of h");
  const double jj = static_cast<double>(j);
  if (ell == 0)
    return 2.0 * d_const(j - 1) / jj * c.M * std::pow(c.C_b, jj - 1.0) * std::pow(std::sqrt(c.L) * c.h_norms[0], jj) *
           std::pow(t, 0.5 * jj);
  return 2.0 * D_const(j - 1) / jj * (c.M + c.g_norm) * std::pow(c.C_b * c.h_norms[static_cast<std::size_t>(ell)], jj) *
         std::pow(t, 0.5 * jj);
}

int choose_N(double t, double tol, const BoundConstants& c, int ell) {
  require(t > 0.0 && t <= 1.0, ErrorKind::domain, "choose_N: t must lie in (0, 1]");
  require(tol > 0.0, ErrorKind::domain, "choose_N: tol must be > 0");
  for (int N = 0; N <= 25; ++N) {
    double tail = 0.0;
    for (int j = N + 1; j <= N + 200; ++j) {
      const double term = truncation_bound(j, c, t, ell);
      tail += term;
      if (term < 1e-18 * tail) break;
    }
    if (tail < tol) return N;
  }
  fail(ErrorKind::numerical, "choose_N: no N <= 25 meets the tolerance; use a smaller time step");
}

}  // namespace degenheat::perturbation
