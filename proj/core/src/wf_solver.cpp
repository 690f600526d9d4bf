#include "degenheat/wf_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <list>
#include <map>
#include <mutex>
#include <sstream>

#include "degenheat/error.hpp"
#include "degenheat/model_kernel.hpp"

namespace degenheat::wf {

using numerics::ChebyshevBasis;
using numerics::Grid;
using numerics::SampledField;

namespace {

std::string format_key(const char* prefix, std::span<const double> v) {
  std::string key = prefix;
  char buf[32];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.17g,", x);
    key += buf;
  }
  return key;
}

double horner(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- DriftSpec

void DriftSpec::validate() {
  if (b0_ < 0.0 && b0_ > -1e-13) b0_ = 0.0;
  if (b1_ < 0.0 && b1_ > -1e-13) b1_ = 0.0;
  require(std::isfinite(b0_) && std::isfinite(b1_), ErrorKind::domain, "drift: b(0), b(1) must be finite");
  require(b0_ >= 0.0, ErrorKind::domain, "drift: b(0) < 0 is not supported (the maximum principle fails)");
  require(b1_ >= 0.0, ErrorKind::domain, "drift: b(1) > 0 is not supported (the maximum principle fails)");
}

DriftSpec DriftSpec::polynomial(std::vector<double> coeffs) {
  require(!coeffs.empty(), ErrorKind::domain, "drift: empty coefficient list");
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
  DriftSpec d;
  d.coeffs_ = coeffs;
  d.fn_ = [c = coeffs](double x) { return horner(c, x); };
  d.b0_ = coeffs[0];
  d.b1_ = 0.0;
  for (double c : coeffs) d.b1_ -= c;
  d.key_ = format_key("poly:", coeffs);
  d.validate();
  return d;
}

DriftSpec DriftSpec::genetics(double mu12, double mu21, double s) {
  // mu12 (1-x) - mu21 x + s x (1-x)
  return polynomial({mu12, -mu12 - mu21 + s, -s});
}

DriftSpec DriftSpec::general(std::function<double(double)> b, std::string key) {
  DriftSpec d;
  d.fn_ = std::move(b);
  d.b0_ = d.fn_(0.0);
  d.b1_ = -d.fn_(1.0);
  if (key.empty()) {
    std::vector<double> samples;
    for (int k = 0; k <= 32; ++k) samples.push_back(d.fn_(0.5 - 0.5 * std::cos(M_PI * k / 32.0)));
    key = format_key("fn:", samples);
  }
  d.key_ = std::move(key);
  d.validate();
  return d;
}

double DriftSpec::operator()(double x) const { return fn_(x); }

int DriftSpec::degree() const { return is_polynomial() ? static_cast<int>(coeffs_.size()) - 1 : -1; }

double DriftSpec::slope_from_left(double x) const {
  if (is_polynomial()) {
    double s = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > 1;) s = s * x + coeffs_[k];
    return s;
  }
  if (x > 1e-4) return (fn_(x) - b0_) / x;
  const double h = 1e-4;
  const double d1 = (fn_(h) - b0_) / h, d2 = (fn_(0.5 * h) - b0_) / (0.5 * h);
  const double slope0 = 2.0 * d2 - d1;
  return slope0 + (d1 - slope0) * x / h;
}

DriftSpec DriftSpec::reflected() const {
  if (is_polynomial()) {
    // -b(1-y) expanded in powers of y
    const std::size_t n = coeffs_.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      double binom = 1.0;
      for (std::size_t j = 0; j <= k; ++j) {
        out[j] -= coeffs_[k] * binom * ((j % 2) ? -1.0 : 1.0);
        binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
      }
    }
    return polynomial(out);
  }
  auto f = fn_;
  return general([f](double y) { return -f(1.0 - y); }, key_ + "|reflected");
}

double DriftSpec::selection_part(double x) const {
  if (is_polynomial()) {
    // r(x) = b(x) - b0 + (b0 + b1) x vanishes at 0 and 1; divide by x then by (1-x).
    std::vector<double> r = coeffs_;
    r.resize(std::max<std::size_t>(r.size(), 2), 0.0);
    r[0] -= b0_;
    r[1] += b0_ + b1_;
    std::vector<double> q(r.begin() + 1, r.end());  // r / x
    // synthetic division by (1 - x) = -(x - 1)
    const std::size_t m = q.size();
    if (m <= 1) return 0.0;
    std::vector<double> quot(m - 1);
    double carry = 0.0;
    for (std::size_t k = m; k-- > 1;) {
      carry = q[k] + carry;
      quot[k - 1] = carry;
    }
    double s = 0.0;
    for (auto it = quot.rbegin(); it != quot.rend(); ++it) s = s * x + *it;
    return -s;
  }
  const double xc = std::clamp(x, 1e-6, 1.0 - 1e-6);
  return (fn_(xc) - b0_ * (1.0 - xc) + b1_ * xc) / (xc * (1.0 - xc));
}

double DriftSpec::selection_integral(double x) const {
  if (x <= 0.0) return 0.0;
  if (is_polynomial()) {
    const numerics::Rule r = numerics::gauss_legendre(std::max(4, degree() + 2), 0.0, x);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) s += r.w[q] * selection_part(r.x[q]);
    return s;
  }
  return numerics::integrate_adaptive([this](double z) { return selection_part(z); }, 0.0, x, 1e-13, 1e-11);
}

// ---------------------------------------------------------------- normal form

NormalForm reduce_to_normal_form(const GeneralCoefficients& gc) {
  require(gc.B > gc.A, ErrorKind::domain, "normal form: need A < B");
  const double A = gc.A, L = gc.B - gc.A;
  const numerics::Function ga = gc.a, gb = gc.b;
  auto a = [=](double X) { return ga(A + L * X) / (L * L); };
  auto b = [=](double X) { return gb(A + L * X) / L; };
  for (int k = 1; k < 400; ++k) {
    const double X = k / 400.0;
    require(a(X) > 0.0, ErrorKind::domain, "normal form: a must be positive in the interior");
  }
  const double eps = 1e-7;
  auto atilde = [=](double X) {
    const double Xc = std::clamp(X, eps, 1.0 - eps);
    return a(Xc) / (Xc * (1.0 - Xc));
  };
  require(b(0.0) >= -1e-12 && b(1.0) <= 1e-12, ErrorKind::domain, "normal form: need b(A) >= 0 and b(B) <= 0");

  // J(theta) = int_0^theta 2 / sqrt(a~(sin^2 phi)) dphi equals int_0^{sin^2 theta} ds/sqrt(a).
  auto J_prime = [=](double th) {
    const double s = std::sin(th);
    return 2.0 / std::sqrt(atilde(s * s));
  };
  const std::size_t deg = 64;
  ChebyshevBasis cb(deg, 0.0, M_PI / 2);
  std::vector<double> Jv(deg + 1, 0.0);
  for (std::size_t k = 1; k <= deg; ++k)
    Jv[k] = Jv[k - 1] + numerics::integrate_adaptive(J_prime, cb.nodes()[k - 1], cb.nodes()[k], 1e-15, 1e-14);
  const double I = Jv[deg];
  const double kappa = (M_PI / I) * (M_PI / I);

  auto theta_of_X = [](double X) { return std::asin(std::sqrt(std::clamp(X, 0.0, 1.0))); };
  auto eta_of_X = [=](double X) { return M_PI / I * cb.evaluate(Jv, theta_of_X(X)); };
  auto X_of_eta = [=](double eta) {
    // Newton on J(theta) = eta I / pi, monotone in theta.
    const double target = eta * I / M_PI;
    double lo = 0.0, hi = M_PI / 2, th = eta / 2.0;
    for (int it = 0; it < 100; ++it) {
      const double f = cb.evaluate(Jv, th) - target;
      if (f > 0) hi = th; else lo = th;
      double step = f / J_prime(th);
      double next = th - step;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - th) < 1e-15) { th = next; break; }
      th = next;
    }
    const double s = std::sin(th);
    return s * s;
  };

  auto a_prime = [&](double X) {
    const double h = 1e-6;
    return (a(X + h) - a(X - h)) / (2.0 * h);
  };
  // a(X)/X = a'(0) + O(X); one Richardson step removes the linear term
  const double h0 = 1e-5;
  const double slope0 = 2.0 * a(h0) / h0 - a(2.0 * h0) / (2.0 * h0);
  const double slope1 = 2.0 * a(1.0 - h0) / h0 - a(1.0 - 2.0 * h0) / (2.0 * h0);
  const double bt0 = b(0.0) / slope0, bt1 = b(1.0) / slope1;

  // b~ tabulated on Chebyshev points in xi.
  ChebyshevBasis xb(deg, 0.0, 1.0);
  std::vector<double> bt(deg + 1);
  for (std::size_t k = 0; k <= deg; ++k) {
    const double xi = xb.nodes()[k];
    if (k == 0) { bt[k] = bt0; continue; }
    if (k == deg) { bt[k] = bt1; continue; }
    const double eta = 2.0 * std::asin(std::sqrt(xi));
    const double X = X_of_eta(eta);
    const double sa = std::sqrt(a(X));
    bt[k] = std::cos(eta) / 2.0 - std::sin(eta) / 4.0 * (I / M_PI) * a_prime(X) / sa +
            b(X) * std::sin(eta) * (I / M_PI) / (2.0 * sa);
  }
  auto bfun = [xb, bt](double xi) { return xb.evaluate(bt, std::clamp(xi, 0.0, 1.0)); };

  NormalForm nf{DriftSpec::general(bfun), kappa, {}, {}};
  nf.xi = [=](double x) {
    const double eta = eta_of_X((x - A) / L);
    const double s = std::sin(eta / 2.0);
    return s * s;
  };
  nf.inverse = [=](double xi) { return A + L * X_of_eta(2.0 * std::asin(std::sqrt(std::clamp(xi, 0.0, 1.0)))); };
  return nf;
}

// ---------------------------------------------------------------- cutoffs and charts

double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double u2 = u * u, u4 = u2 * u2;
  return u4 * (35.0 - 84.0 * u + 70.0 * u2 - 20.0 * u2 * u);
}

double smoothstep_derivative(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  const double u2 = u * u;
  return 140.0 * u2 * u * (1.0 - u) * (1.0 - u) * (1.0 - u);
}

double Cutoffs::phi_l(double y) const { return smoothstep((left_zero - y) / (left_zero - left_one)); }
double Cutoffs::dphi_l(double y) const {
  const double w = left_zero - left_one;
  return -smoothstep_derivative((left_zero - y) / w) / w;
}
double Cutoffs::phi_r(double y) const { return smoothstep((y - right_zero) / (right_one - right_zero)); }
double Cutoffs::dphi_r(double y) const {
  const double w = right_one - right_zero;
  return smoothstep_derivative((y - right_zero) / w) / w;
}
double Cutoffs::phi_0(double y) const { return smoothstep((mid_zero - y) / (mid_zero - mid_one)); }

double LocalChart::to_chart(double y) const {
  const double v = end == ChartEnd::left ? y : 1.0 - y;
  const double a = std::asin(std::sqrt(std::clamp(v, 0.0, 1.0)));
  return a * a;
}

double LocalChart::from_chart(double x) const {
  const double s = std::sin(std::sqrt(x));
  return end == ChartEnd::left ? s * s : 1.0 - s * s;
}

double LocalChart::jacobian(double y) const {
  const double v = std::clamp(end == ChartEnd::left ? y : 1.0 - y, 0.0, 1.0);
  if (v < 1e-12) return 1.0 + 2.0 * v / 3.0;
  if (v >= 1.0) return INFINITY;
  return std::asin(std::sqrt(v)) / std::sqrt(v * (1.0 - v));
}

namespace {

// (2 th / sin 2th - 1) / th^2 and (1/2 - th cot 2th) / th^2
double chart_e1(double th) {
  const double t2 = th * th;
  if (th < 1e-2) return 2.0 / 3.0 + t2 * (14.0 / 45.0 + t2 * 124.0 / 945.0);
  return (2.0 * th / std::sin(2.0 * th) - 1.0) / t2;
}
double chart_e2(double th) {
  const double t2 = th * th;
  if (th < 1e-2) return 2.0 / 3.0 + t2 * (8.0 / 45.0 + t2 * 64.0 / 945.0);
  return (0.5 - th * std::cos(2.0 * th) / std::sin(2.0 * th)) / t2;
}

}  // namespace

LocalChart local_chart(const DriftSpec& d, ChartEnd end, const Cutoffs& cut) {
  const DriftSpec dd = end == ChartEnd::left ? d : d.reflected();
  LocalChart ch;
  ch.end = end;
  ch.b_index = dd.b0();
  ch.eta = cut.eta;
  ch.c = [dd](double x) {
    const double th = std::sqrt(x);
    const double s = std::sin(th);
    const double y = s * s;
    const double sinc2 = th > 0.0 ? (s / th) * (s / th) : 1.0;
    const double ratio = th > 0.0 ? 2.0 * th / std::sin(2.0 * th) : 1.0;
    return dd.slope_from_left(y) * sinc2 * ratio + dd.b0() * chart_e1(th) + chart_e2(th);
  };
  const double q = (M_PI / 2) * (M_PI / 2);
  const double eta = cut.eta;
  auto c = ch.c;
  ch.h = perturbation::PerturbationField::make(
      [c, q, eta](double x) { return c(x) * smoothstep((q - eta - x) / eta); }, q - eta);
  return ch;
}

// ---------------------------------------------------------------- step operator

namespace {

struct ChartSide {
  LocalChart chart;
  std::function<double(double)> phi, dphi;
};

// Rows of the chart solution at the chart points X for data phi(y) l_j(y) pulled back.
Eigen::MatrixXd chart_solution(const ChartSide& side, const ChebyshevBasis& basis, std::span<const double> X,
                               double tau, int N, const SolverOptions& opt) {
  const std::size_t n1 = basis.size();
  const LocalChart& ch = side.chart;
  const double b = ch.b_index;
  const bool left = ch.end == ChartEnd::left;
  // data support ends where the pasting cutoff vanishes
  const double vzero = left ? opt.cutoffs.left_zero : 1.0 - opt.cutoffs.right_zero;
  const double th_data = std::asin(std::sqrt(vzero));
  const double x_data = th_data * th_data;

  std::vector<double> val(n1), der(n1);
  auto data = [&](double x, bool derivative, double* out) {
    const double th = std::sqrt(x);
    const double s = std::sin(th);
    const double y = left ? s * s : 1.0 - s * s;
    const double ph = side.phi(y);
    if (!derivative) {
      if (ph == 0.0) { std::fill(out, out + n1, 0.0); return; }
      basis.cardinal(y, val);
      for (std::size_t j = 0; j < n1; ++j) out[j] = ph * val[j];
      return;
    }
    const double dph = side.dphi(y);
    if (ph == 0.0 && dph == 0.0) { std::fill(out, out + n1, 0.0); return; }
    basis.cardinal_with_derivative(y, val, der);
    const double dy = (th > 0.0 ? std::sin(2.0 * th) / (2.0 * th) : 1.0) * (left ? 1.0 : -1.0);
    for (std::size_t j = 0; j < n1; ++j) out[j] = (dph * val[j] + ph * der[j]) * dy;
  };

  // main term at the output points
  model::KernelRuleOptions main_opt;
  main_opt.upper = x_data;
  main_opt.panel_width = 1.0;
  main_opt.points_per_panel = 16;
  main_opt.max_panel = opt.neumann.max_panel;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(n1));
  std::vector<double> buf(n1), f0(n1);
  data(0.0, false, f0.data());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const model::KernelRule r = model::kernel_rule(b, tau, X[i], main_opt);
    auto row = out.row(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n1; ++j) row[static_cast<Eigen::Index>(j)] = r.atom * f0[j];
    for (std::size_t q = 0; q < r.y.size(); ++q) {
      data(r.y[q], false, buf.data());
      for (std::size_t j = 0; j < n1; ++j) row[static_cast<Eigen::Index>(j)] += r.w[q] * buf[j];
    }
  }
  if (N == 0) return out;

  // chart grid, uniform in sqrt(x) where the pulled-back nodes are uniform
  const double h_th = M_PI / (2.0 * (static_cast<double>(n1) - 1.0) * opt.chart_refine);
  std::vector<double> xs;
  for (double th = 0.0;; th += h_th) {
    xs.push_back(th * th);
    if (th > th_data + 0.05 && xs.size() >= 16) break;
  }
  const Grid grid(xs, numerics::Domain::half_line(xs.back()));
  const auto times = perturbation::sqrt_time_nodes(tau, opt.neumann.time_nodes);
  const std::size_t M = xs.size(), K = times.size();
  perturbation::NeumannOperator op(b, ch.h, grid, times, opt.neumann);

  model::KernelRuleOptions dopt = main_opt;
  dopt.panel_width = opt.neumann.panel_width;
  dopt.points_per_panel = opt.neumann.points_per_panel;
  Eigen::MatrixXd D0(static_cast<Eigen::Index>(M * K), static_cast<Eigen::Index>(n1));
  for (std::size_t m = 0; m < M; ++m) {
    data(xs[m], true, buf.data());
    for (std::size_t j = 0; j < n1; ++j) D0(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = buf[j];
  }
  for (std::size_t k = 1; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      auto row = D0.row(static_cast<Eigen::Index>(k * M + m));
      row.setZero();
      const model::KernelRule r = model::kernel_rule(b + 1.0, times[k], xs[m], dopt);
      for (std::size_t q = 0; q < r.y.size(); ++q) {
        data(r.y[q], true, buf.data());
        for (std::size_t j = 0; j < n1; ++j) row[static_cast<Eigen::Index>(j)] += r.w[q] * buf[j];
      }
    }
  }
  std::vector<double> Xc(X.begin(), X.end());
  Eigen::MatrixXd G = op.apply_gradient(D0);
  out += op.interpolate(G, Xc, K - 1);
  for (int j = 2; j <= N; ++j) {
    G = op.apply_gradient(op.gradient(G));
    out += op.interpolate(G, Xc, K - 1);
  }
  return out;
}

struct CacheEntry {
  std::string key;
  std::shared_ptr<const StepOperator> op;
};

std::mutex g_cache_mutex;
std::list<CacheEntry> g_cache;

std::string step_key(const DriftSpec& d, double tau, int N, const SolverOptions& opt) {
  const double v[] = {tau,
                      static_cast<double>(N),
                      static_cast<double>(opt.degree),
                      opt.chart_refine,
                      opt.cutoffs.left_one,
                      opt.cutoffs.left_zero,
                      opt.cutoffs.right_one,
                      opt.cutoffs.right_zero,
                      opt.cutoffs.mid_one,
                      opt.cutoffs.mid_zero,
                      opt.cutoffs.eta,
                      static_cast<double>(opt.neumann.time_nodes),
                      static_cast<double>(opt.neumann.sigma_points),
                      static_cast<double>(opt.neumann.interp_degree),
                      opt.neumann.panel_width,
                      static_cast<double>(opt.neumann.points_per_panel),
                      opt.neumann.max_panel};
  return d.key() + "|" + format_key("", v);
}

}  // namespace

StepOperator::StepOperator(const DriftSpec& d, double tau, int N, const SolverOptions& opt)
    : basis_(static_cast<std::size_t>(opt.degree), 0.0, 1.0), tau_(tau), N_(N) {
  require(tau > 0.0, ErrorKind::domain, "step operator: tau must be > 0");
  require(N >= 0, ErrorKind::domain, "step operator: N must be >= 0");
  const auto& cut = opt.cutoffs;
  const std::size_t n1 = basis_.size();
  const auto& y = basis_.nodes();
  P_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n1));

  for (ChartEnd end : {ChartEnd::left, ChartEnd::right}) {
    ChartSide side{local_chart(d, end, cut), {}, {}};
    if (end == ChartEnd::left) {
      side.phi = [cut](double v) { return cut.phi_l(v); };
      side.dphi = [cut](double v) { return cut.dphi_l(v); };
    } else {
      side.phi = [cut](double v) { return cut.phi_r(v); };
      side.dphi = [cut](double v) { return cut.dphi_r(v); };
    }
    std::vector<std::size_t> rows;
    std::vector<double> X, weight;
    for (std::size_t i = 0; i < n1; ++i) {
      const double p0 = cut.phi_0(y[i]);
      const double w = end == ChartEnd::left ? p0 : 1.0 - p0;
      if (w == 0.0) continue;
      rows.push_back(i);
      X.push_back(side.chart.to_chart(y[i]));
      weight.push_back(w);
    }
    if (rows.empty()) continue;
    const Eigen::MatrixXd U = chart_solution(side, basis_, X, tau, N, opt);
    for (std::size_t r = 0; r < rows.size(); ++r)
      P_.row(static_cast<Eigen::Index>(rows[r])) += weight[r] * U.row(static_cast<Eigen::Index>(r));
  }
}

std::shared_ptr<const StepOperator> StepOperator::get(const DriftSpec& d, double tau, int N, const SolverOptions& opt) {
  const std::string key = step_key(d, tau, N, opt);
  {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    for (auto it = g_cache.begin(); it != g_cache.end(); ++it) {
      if (it->key == key) {
        g_cache.splice(g_cache.begin(), g_cache, it);
        return g_cache.front().op;
      }
    }
  }
  auto op = std::make_shared<const StepOperator>(d, tau, N, opt);
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  g_cache.push_front({key, op});
  while (g_cache.size() > 12) g_cache.pop_back();
  return op;
}

double step_size(double t, double tau_max) {
  require(t > 0.0 && std::isfinite(t), ErrorKind::domain, "solver: t must be > 0");
  require(tau_max > 0.0, ErrorKind::domain, "solver: tau_max must be > 0");
  double tau = t;
  while (tau > tau_max) tau *= 0.5;
  return tau;
}

int solver_terms(const DriftSpec& d, double tau, double t, double tol, const SolverOptions& opt) {
  if (opt.N >= 0) return opt.N;
  int N = 0;
  for (ChartEnd end : {ChartEnd::left, ChartEnd::right}) {
    const LocalChart ch = local_chart(d, end, opt.cutoffs);
    perturbation::BoundConstants bc;
    const double Cb = model::gradient_constant(ch.b_index);
    bc.M = Cb;
    bc.C_b = 2.0 * Cb;
    bc.L = ch.h.support;
    bc.h_norms = {ch.h.sup_norm};
    N = std::max(N, perturbation::choose_N(std::min(tau, 1.0), tol * tau / t, bc));
  }
  return N;
}

Propagator::Propagator(const DriftSpec& d, double t, const SolverOptions& opt) {
  const double tau = step_size(t, opt.tau_max);
  const int N = solver_terms(d, tau, t, opt.tol, opt);
  step_ = StepOperator::get(d, tau, N, opt);
  Q_ = step_->matrix();
  double reached = tau;
  steps_ = 1;
  while (reached < t * (1.0 - 1e-12)) {
    Q_ = (Q_ * Q_).eval();
    reached *= 2.0;
    steps_ *= 2;
  }
}

// ---------------------------------------------------------------- backward

std::vector<double> solve_backward_nodes(const DriftSpec& d, const numerics::Function& f, double t, double tol,
                                         SolverOptions opt) {
  opt.tol = tol;
  Propagator prop(d, t, opt);
  const auto& y = prop.basis().nodes();
  Eigen::VectorXd u0(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    u0[static_cast<Eigen::Index>(i)] = f(y[i]);
    require(std::isfinite(u0[static_cast<Eigen::Index>(i)]), ErrorKind::input, "solve_backward: data is not finite");
  }
  const Eigen::VectorXd u = prop.matrix() * u0;
  return std::vector<double>(u.data(), u.data() + u.size());
}

SampledField solve_backward(const DriftSpec& d, const numerics::Function& f, double t, const Grid& out, double tol,
                            SolverOptions opt) {
  const auto u = solve_backward_nodes(d, f, t, tol, opt);
  ChebyshevBasis basis(static_cast<std::size_t>(opt.degree), 0.0, 1.0);
  std::vector<double> v(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(out[i] >= 0.0 && out[i] <= 1.0, ErrorKind::domain, "solve_backward: output grid must lie in [0,1]");
    v[i] = basis.evaluate(u, out[i]);
  }
  return SampledField(out, std::move(v));
}

namespace {

// Cubic interpolation error of sampled data: interpolate from the even nodes at the odd ones
// and divide by 2^4.
double data_resolution_error(const SampledField& f) {
  const auto& x = f.grid.nodes();
  std::vector<double> cx, cv;
  for (std::size_t i = 0; i < x.size(); i += 2) {
    cx.push_back(x[i]);
    cv.push_back(f.values[i]);
  }
  if (cx.back() != x.back()) {
    cx.push_back(x.back());
    cv.push_back(f.values.back());
  }
  if (cx.size() < 4) return std::numeric_limits<double>::infinity();
  double err = 0.0;
  for (std::size_t i = 1; i < x.size(); i += 2) {
    const std::size_t c = static_cast<std::size_t>(std::upper_bound(cx.begin(), cx.end(), x[i]) - cx.begin());
    const std::size_t j0 = std::min(c >= 2 ? c - 2 : 0, cx.size() - 4);
    double v = 0.0;
    for (std::size_t a = j0; a < j0 + 4; ++a) {
      double l = 1.0;
      for (std::size_t b = j0; b < j0 + 4; ++b)
        if (b != a) l *= (x[i] - cx[b]) / (cx[a] - cx[b]);
      v += l * cv[a];
    }
    err = std::max(err, std::abs(v - f.values[i]));
  }
  return err / 16.0;
}

void require_resolvable(const SampledField& f, double tol, const char* who) {
  const double scale = std::max(1.0, f.sup_norm());
  const double err = data_resolution_error(f);
  if (err > tol * scale) {
    std::ostringstream os;
    os << who << ": tol " << tol << " is below the estimated interpolation error " << err << " of the "
       << f.grid.size() << "-node data grid; refine the grid or loosen tol";
    fail(ErrorKind::numerical, os.str());
  }
}

}  // namespace

SampledField solve_backward(const DriftSpec& d, const SampledField& f, double t, double tol, SolverOptions opt) {
  require(f.grid.front() <= 1e-12 && f.grid.back() >= 1.0 - 1e-12, ErrorKind::input,
          "solve_backward: data grid must cover [0,1]");
  require_resolvable(f, tol, "solve_backward");
  auto fn = [&f](double y) { return numerics::interpolate(f, std::clamp(y, f.grid.front(), f.grid.back())); };
  SampledField out = solve_backward(d, fn, t, f.grid, tol, opt);
  out.smoothness = f.smoothness;
  return out;
}

// ---------------------------------------------------------------- forward

double SolutionMeasure::density_at(double y) const {
  if (p_nodes.empty()) return 0.0;
  ChebyshevBasis cb(p_nodes.size() - 1, 0.0, 1.0);
  return std::pow(y, alpha0) * std::pow(1.0 - y, alpha1) * cb.evaluate(p_nodes, y);
}

double SolutionMeasure::mass() const {
  double m = atom0 + atom1;
  if (p_nodes.empty()) return m;
  const numerics::Rule gj = numerics::gauss_jacobi(p_nodes.size() + 2, alpha1, alpha0);
  ChebyshevBasis cb(p_nodes.size() - 1, 0.0, 1.0);
  const double scale = std::pow(2.0, -(alpha0 + alpha1 + 1.0));
  for (std::size_t q = 0; q < gj.size(); ++q) m += scale * gj.w[q] * cb.evaluate(p_nodes, 0.5 * (1.0 + gj.x[q]));
  return m;
}

double SolutionMeasure::pair(const numerics::Function& f) const {
  ChebyshevBasis cb(weights.size() - 1, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * f(cb.nodes()[i]);
  return s;
}

SolutionMeasure measure_from_moments(const DriftSpec& d, const ChebyshevBasis& basis, std::span<const double> moments,
                                     std::size_t samples) {
  const std::size_t n1 = basis.size();
  require(moments.size() == n1, ErrorKind::domain, "measure: moment count must match the basis");
  SolutionMeasure out{SampledField(numerics::uniform_grid(0.0, 1.0, 8, numerics::Domain::unit()),
                                   std::vector<double>(8, 0.0)),
                      0.0, 0.0, 0.0, 0.0, {}, {}};
  const bool atom0 = d.b0() == 0.0, atom1 = d.b1() == 0.0;
  out.alpha0 = atom0 ? 0.0 : d.b0() - 1.0;
  out.alpha1 = atom1 ? 0.0 : d.b1() - 1.0;
  const std::size_t m = n1 - 1 - (atom0 ? 1 : 0) - (atom1 ? 1 : 0);
  ChebyshevBasis pb(m, 0.0, 1.0);
  const numerics::Rule gj = numerics::gauss_jacobi(n1 + 2, out.alpha1, out.alpha0);
  const double scale = std::pow(2.0, -(out.alpha0 + out.alpha1 + 1.0));
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n1));
  std::vector<double> li(n1), pj(m + 1);
  for (std::size_t q = 0; q < gj.size(); ++q) {
    const double y = 0.5 * (1.0 + gj.x[q]);
    basis.cardinal(y, li);
    pb.cardinal(y, pj);
    const double w = scale * gj.w[q];
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j <= m; ++j)
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += w * li[i] * pj[j];
  }
  std::size_t col = m + 1;
  const std::size_t c0 = col;
  if (atom0) A(0, static_cast<Eigen::Index>(col++)) = 1.0;
  const std::size_t c1 = col;
  if (atom1) A(static_cast<Eigen::Index>(n1 - 1), static_cast<Eigen::Index>(col++)) = 1.0;
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(moments.data(), static_cast<Eigen::Index>(n1));
  const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(rhs);
  out.p_nodes.assign(sol.data(), sol.data() + m + 1);
  if (atom0) out.atom0 = sol[static_cast<Eigen::Index>(c0)];
  if (atom1) out.atom1 = sol[static_cast<Eigen::Index>(c1)];
  out.weights.assign(moments.begin(), moments.end());

  std::vector<double> ys(samples), vs(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    ys[k] = 0.5 - 0.5 * std::cos(M_PI * (static_cast<double>(k) + 0.5) / static_cast<double>(samples));
    vs[k] = std::pow(ys[k], out.alpha0) * std::pow(1.0 - ys[k], out.alpha1) * pb.evaluate(out.p_nodes, ys[k]);
  }
  out.density = SampledField(Grid(ys, numerics::Domain::unit()), vs);
  return out;
}

namespace {

SolutionMeasure evolve_moments(const DriftSpec& d, std::vector<double> w0, double t, const SolverOptions& opt) {
  Propagator prop(d, t, opt);
  const Eigen::VectorXd w =
      prop.matrix().transpose() * Eigen::Map<const Eigen::VectorXd>(w0.data(), static_cast<Eigen::Index>(w0.size()));
  std::vector<double> wv(w.data(), w.data() + w.size());
  return measure_from_moments(d, prop.basis(), wv);
}

std::vector<double> moments_of(const ChebyshevBasis& basis, const numerics::Function& g, std::span<const double> breaks) {
  std::vector<double> pts{0.0};
  for (double b : breaks)
    if (b > 0.0 && b < 1.0) pts.push_back(b);
  pts.push_back(1.0);
  std::sort(pts.begin(), pts.end());
  const std::size_t n1 = basis.size();
  std::vector<double> mom(n1, 0.0), li(n1);
  for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
    if (!(pts[p + 1] > pts[p])) continue;
    const numerics::Rule r = numerics::graded_rule(pts[p], pts[p + 1], 24, p == 0, p + 2 == pts.size(), 30, 0.15);
    for (std::size_t q = 0; q < r.size(); ++q) {
      const double gv = g(r.x[q]);
      require(std::isfinite(gv), ErrorKind::input, "solve_forward: initial density is not finite");
      require(gv >= -1e-14, ErrorKind::input, "solve_forward: initial density must be >= 0");
      basis.cardinal(r.x[q], li);
      for (std::size_t i = 0; i < n1; ++i) mom[i] += r.w[q] * gv * li[i];
    }
  }
  return mom;
}

}  // namespace

SolutionMeasure solve_forward(const DriftSpec& d, const numerics::Function& g, double t, std::span<const double> breaks,
                              SolverOptions opt) {
  ChebyshevBasis basis(static_cast<std::size_t>(opt.degree), 0.0, 1.0);
  return evolve_moments(d, moments_of(basis, g, breaks), t, opt);
}

SolutionMeasure solve_forward(const DriftSpec& d, const SampledField& g, double t, SolverOptions opt) {
  for (double v : g.values) require(v >= 0.0, ErrorKind::input, "solve_forward: initial density must be >= 0");
  const double lo = g.grid.front(), hi = g.grid.back();
  auto fn = [&g, lo, hi](double y) { return (y < lo || y > hi) ? 0.0 : std::max(0.0, numerics::interpolate(g, y)); };
  std::vector<double> breaks(g.grid.nodes().begin(), g.grid.nodes().end());
  return solve_forward(d, fn, t, breaks, opt);
}

SolutionMeasure solve_forward_point(const DriftSpec& d, double x0, double t, SolverOptions opt) {
  require(x0 >= 0.0 && x0 <= 1.0, ErrorKind::domain, "solve_forward: point must lie in [0,1]");
  ChebyshevBasis basis(static_cast<std::size_t>(opt.degree), 0.0, 1.0);
  std::vector<double> w0(basis.size());
  basis.cardinal(x0, w0);
  return evolve_moments(d, std::move(w0), t, opt);
}

Eigen::MatrixXd wf_kernel(const DriftSpec& d, double t, std::span<const double> x, std::span<const double> y,
                          SolverOptions opt) {
  Propagator prop(d, t, opt);
  const auto& basis = prop.basis();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(y.size()));
  std::vector<double> w0(basis.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    basis.cardinal(x[i], w0);
    const Eigen::VectorXd w =
        prop.matrix().transpose() * Eigen::Map<const Eigen::VectorXd>(w0.data(), static_cast<Eigen::Index>(w0.size()));
    std::vector<double> wv(w.data(), w.data() + w.size());
    const SolutionMeasure m = measure_from_moments(d, basis, wv, 8);
    for (std::size_t j = 0; j < y.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.density_at(y[j]);
  }
  return out;
}

// ---------------------------------------------------------------- kernel diagnostics

double parametrix_kernel(const DriftSpec& d, double t, double x, double y, int N, const Cutoffs& cut) {
  require(t > 0.0, ErrorKind::domain, "parametrix_kernel: t must be > 0");
  require(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0, ErrorKind::domain, "parametrix_kernel: x, y in [0,1]");
  require(N >= 0, ErrorKind::domain, "parametrix_kernel: N must be >= 0");
  double q = 0.0;
  for (ChartEnd end : {ChartEnd::left, ChartEnd::right}) {
    const double p0 = cut.phi_0(x);
    const double wx = end == ChartEnd::left ? p0 : 1.0 - p0;
    const double wy = end == ChartEnd::left ? cut.phi_l(y) : cut.phi_r(y);
    if (wx == 0.0 || wy == 0.0) continue;
    const LocalChart ch = local_chart(d, end, cut);
    const double X = ch.to_chart(x), Y = ch.to_chart(y);
    double k = model::k_density(ch.b_index, t, X, Y);
    if (N > 0) {
      const double b = ch.b_index;
      auto dg = [b, Y](double z, double s) {
        return (model::k_density(b + 1.0, s, z, Y) - model::k_density(b, s, z, Y)) / s;
      };
      const auto it = perturbation::neumann_iterates_concentrated(b, ch.h, dg, Y, t, N, std::span<const double>(&X, 1));
      k += it.sum();
    }
    q += wx * k * wy * ch.jacobian(y);
  }
  return q;
}

// ---------------------------------------------------------------- derivative check

DerivativeCheck backward_derivative_check(const DriftSpec& d, const numerics::Function& f, double t, int j, double tol,
                                          SolverOptions opt) {
  require(j >= 0 && j <= 4, ErrorKind::domain, "backward_derivative_check: j must lie in [0,4]");
  opt.tol = tol;
  Propagator prop(d, t, opt);
  const auto& basis = prop.basis();
  const auto& y = basis.nodes();
  const std::size_t n1 = y.size();
  Eigen::VectorXd u0(static_cast<Eigen::Index>(n1));
  for (std::size_t i = 0; i < n1; ++i) u0[static_cast<Eigen::Index>(i)] = f(y[i]);
  const Eigen::MatrixXd& P = prop.step().matrix();
  // u(t - h), u(t), u(t + h) with h = 8 tau
  Eigen::VectorXd um = u0;
  const int back = prop.steps() - 8;
  require(back >= 1, ErrorKind::domain, "backward_derivative_check: t too small for the step size");
  Eigen::MatrixXd Pm = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n1));
  {
    Eigen::MatrixXd base = P;
    int e = back;
    while (e > 0) {
      if (e & 1) Pm = (Pm * base).eval();
      base = (base * base).eval();
      e >>= 1;
    }
  }
  um = Pm * u0;
  Eigen::VectorXd uc = um, up;
  for (int k = 0; k < 8; ++k) uc = P * uc;
  up = uc;
  for (int k = 0; k < 8; ++k) up = P * up;
  const double h = 8.0 * prop.tau();

  Eigen::MatrixXd D(static_cast<Eigen::Index>(n1), static_cast<Eigen::Index>(n1));
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t k = 0; k < n1; ++k)
      D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = basis.diff_matrix()[i * n1 + k];
  std::vector<Eigen::VectorXd> du{uc};
  for (int k = 1; k <= j + 2; ++k) du.push_back(D * du.back());
  Eigen::VectorXd vt = (up - um) / (2.0 * h);
  for (int k = 0; k < j; ++k) vt = (D * vt).eval();

  // drift derivatives at the nodes by Chebyshev differentiation of the sampled drift
  std::vector<Eigen::VectorXd> bd;
  {
    Eigen::VectorXd bv(static_cast<Eigen::Index>(n1));
    for (std::size_t i = 0; i < n1; ++i) bv[static_cast<Eigen::Index>(i)] = d(y[i]);
    bd.push_back(bv);
    for (int k = 1; k <= j; ++k) bd.push_back(D * bd.back());
  }
  DerivativeCheck rep;
  rep.j = j;
  const double jj = static_cast<double>(j);
  for (std::size_t i = 1; i + 1 < n1; ++i) {
    const auto I = static_cast<Eigen::Index>(i);
    const double x = y[i];
    double rhs = x * (1.0 - x) * du[static_cast<std::size_t>(j) + 2][I] +
                 (bd[0][I] + jj * (1.0 - 2.0 * x)) * du[static_cast<std::size_t>(j) + 1][I] - jj * (jj - 1.0) * du[static_cast<std::size_t>(j)][I];
    double binom = 1.0;
    for (int k = 1; k <= j; ++k) {
      binom = binom * (jj - k + 1.0) / k;
      rhs += binom * bd[static_cast<std::size_t>(k)][I] * du[static_cast<std::size_t>(j + 1 - k)][I];
    }
    rep.residual = std::max(rep.residual, std::abs(vt[I] - rhs));
    rep.scale = std::max(rep.scale, std::abs(vt[I]));
  }
  return rep;
}

}  // namespace degenheat::wf
