// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "degenheat/csv.hpp"
#include "degenheat/model_kernel.hpp"
#include "degenheat/numerics.hpp"
#include "degenheat/oracles.hpp"
#include "degenheat/perturbation.hpp"
#include "degenheat/specfun.hpp"
#include "degenheat/spectral.hpp"
#include "degenheat/wf_solver.hpp"

using namespace degenheat;
using model::ModelKernel;
using model::Poly;
using numerics::Domain;
using wf::DriftSpec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int failures = 0;

void run_criterion(int id, const char* name, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit > 0 && secs > time_limit) o.require(false, "runtime " + num(secs) + " s over " + num(time_limit) + " s");
  if (!o.pass) ++failures;
  std::printf("%s %2d %-28s %7.2f s  %s\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail.c_str());
  std::fflush(stdout);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k] / x.size();
    my += y[k] / y.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

// Forward summation in long double, independent of the library's evaluation.
long double psi_series(long double b, long double z) {
  long double sum = 0.0L, term = 1.0L / std::tgamma(b);
  for (int j = 0; j < 600; ++j) {
    sum += term;
    term *= z / ((j + 1.0L) * (j + b));
    if (term < 1e-22L * sum) break;
  }
  return sum;
}

Outcome psi_ode() {
  Outcome o;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ub(0.0, 5.0), uz(0.0, 50.0);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    double b = ub(rng);
    if (b == 0.0) b = 5.0;
    const double z = uz(rng);
    const double p = specfun::psi(b, z).value;
    const double r = z * specfun::psi_second(b, z) + b * specfun::psi_prime(b, z) - p;
    worst = std::max(worst, std::abs(r) / std::max(1.0, p));
  }
  o.require(worst <= 1e-10, "ODE residual " + num(worst));
  const double v = specfun::psi(1.0, 1.0).value;
  o.require(std::abs(v - 2.2795853023) <= 1e-9, "psi_1(1) = " + num(v));
  o.require(std::abs(v - static_cast<double>(psi_series(1.0L, 1.0L))) <= 1e-12, "psi_1(1) disagrees with the series");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("max relative residual ") + num(worst);
  return o;
}

// Kernel mass by adaptive quadrature over the window, with the y^{b-1} endpoint factor
// handled by the singular rule near 0.
double kernel_mass(double b, double t, double x) {
  auto [lo, hi] = model::kernel_window(b, t, x);
  const int P = 6;
  auto pieces = [&](const numerics::Function& f, double a, double c) {
    double s = 0;
    for (int p = 0; p < P; ++p)
      s += numerics::integrate_adaptive(f, a + (c - a) * p / P, a + (c - a) * (p + 1) / P, 1e-16, 1e-12);
    return s;
  };
  if (b == 0.0) return model::k_atom(0, t, x) + pieces([&](double y) { return model::k_dirichlet0(t, x, y); }, lo, hi);
  const ModelKernel k(b, t);
  auto dens = [&](double y) { return model::k_model(k, x, y); };
  if (lo > 0.0) return pieces(dens, lo, hi);
  const double cut = std::min(hi, 50 * t);
  auto g = [&](double y) { return y == 0.0 ? 0.0 : model::k_model(k, x, y) / std::pow(y, b - 1.0); };
  return numerics::integrate_singular(g, b, cut) + (hi > cut ? pieces(dens, cut, hi) : 0.0);
}

Outcome kernel_mass_positivity() {
  Outcome o;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> ub(0, 4), ut(1e-3, 2), ux(0, 3);
  double worst = 0;
  int negative = 0;
  for (int i = 0; i < 50; ++i) {
    const double b = i < 8 ? 0.0 : ub(rng), t = ut(rng), x = ux(rng);
    worst = std::max(worst, std::abs(kernel_mass(b, t, x) - 1.0));
    const auto rule = model::kernel_rule(b, t, x);
    double m = rule.atom;
    for (double w : rule.w) m += w;
    worst = std::max(worst, std::abs(m - 1.0));
    for (int k = 1; k <= 20; ++k)
      if (!(model::k_density(b, t, x + 0.01, 0.15 * k) > 0.0)) ++negative;
  }
  o.require(worst <= 1e-9, "mass error " + num(worst));
  o.require(negative == 0, std::to_string(negative) + " nonpositive values");
  if (o.pass) o.detail = "max |mass - 1| " + num(worst);
  return o;
}

Outcome chapman_kolmogorov() {
  Outcome o;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> ub(0.2, 3), ut(0.05, 1), ux(0.05, 2);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const double b = ub(rng), t = ut(rng), s = ut(rng), x = ux(rng), y = ux(rng);
    const ModelKernel kt(b, t), ks(b, s), kts(b, t + s);
    auto [lo, hi] = model::kernel_window(b, t, x);
    double sum = 0;
    const int P = 60;
    for (int p = 0; p < P; ++p)
      sum += numerics::integrate_adaptive(
          [&](double z) { return z == 0 ? 0 : model::k_model(kt, x, z) * model::k_model(ks, z, y); },
          lo + (hi - lo) * p / P, lo + (hi - lo) * (p + 1) / P, 1e-18, 1e-12);
    const double ref = model::k_model(kts, x, y);
    worst = std::max(worst, std::abs(sum - ref) / ref);
  }
  o.require(worst <= 1e-7, "relative error " + num(worst));
  if (o.pass) o.detail = "max relative error " + num(worst);
  return o;
}

Outcome polynomial_exactness() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ub(0, 3), ut(0.01, 1.5);
  const auto out = numerics::uniform_grid(0, 2, 21, Domain::half_line(2));
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    const double b = i == 0 ? 0.0 : ub(rng), t = ut(rng);
    for (int d = 0; d <= 3; ++d) {
      Poly p;
      p.c.assign(static_cast<std::size_t>(d) + 1, 0.0);
      p.c.back() = 1.0;
      const Poly e = model::exp_poly(b, t, p);
      const auto u = model::apply_kernel(ModelKernel(b, t), [&](double y) { return p(y); }, out);
      for (std::size_t m = 0; m < out.size(); ++m) {
        const double v = u.field.values[m];
        worst = std::max(worst, std::abs(v - e(out[m])) / (1 + std::abs(e(out[m]))));
      }
    }
  }
  o.require(worst <= 1e-9, "error " + num(worst));
  if (o.pass) o.detail = "max scaled error " + num(worst);
  return o;
}

Outcome derivative_transfer_fd() {
  Outcome o;
  const double a = std::numbers::pi / 3;
  auto bump = [a](double y) { return y < 3 ? std::pow(std::sin(a * y), 6) : 0.0; };
  auto d1 = [a](double y) { return y < 3 ? 6 * a * std::pow(std::sin(a * y), 5) * std::cos(a * y) : 0.0; };
  auto d2 = [a](double y) {
    if (y >= 3) return 0.0;
    const double s = std::sin(a * y), c = std::cos(a * y);
    return 6 * a * a * (5 * std::pow(s, 4) * c * c - std::pow(s, 6));
  };
  const double h = 2e-3;
  double worst = 0;
  for (double t : {0.05, 0.2}) {
    for (double b : {0.5, 1.0, 3.0}) {
      const ModelKernel k(b, t);
      for (double x : {0.3, 1.0, 1.7}) {
        const numerics::Grid pts({x - 3 * h, x - 2 * h, x - h, x, x + h, x + 2 * h, x + 3 * h, x + 4 * h},
                                 Domain::half_line(4));
        const auto u = model::apply_kernel(k, bump, pts).field;
        const double fd1 = (u.values[1] - 8 * u.values[2] + 8 * u.values[4] - u.values[5]) / (12 * h);
        const double fd2 =
            (-u.values[1] + 16 * u.values[2] - 30 * u.values[3] + 16 * u.values[4] - u.values[5]) / (12 * h * h);
        const double t1 = model::derivative_transfer(k, d1, 1, pts).values[3];
        const double t2 = model::derivative_transfer(k, d2, 2, pts).values[3];
        worst = std::max(worst, std::abs(t1 - fd1) / std::max(1.0, std::abs(t1)));
        worst = std::max(worst, std::abs(t2 - fd2) / std::max(1.0, std::abs(t2)));
      }
    }
  }
  o.require(worst <= 1e-5, "relative error " + num(worst));
  if (o.pass) o.detail = "max relative error " + num(worst);
  return o;
}

Outcome closed_form_solution() {
  Outcome o;
  const auto d = DriftSpec::polynomial({0.0});
  const auto out = numerics::uniform_grid(0, 1, 101, Domain::unit());
  double worst = 0;
  for (double t : {0.1, 0.5, 1.0}) {
    // x^2 = x - (x - x^2): eigenvalues 0 and -2 of the monomial matrix
    const auto u = wf::solve_backward(d, [](double y) { return y * y; }, t, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = out[i];
      worst = std::max(worst, std::abs(u.values[i] - (x - (x - x * x) * std::exp(-2 * t))));
    }
  }
  o.require(worst <= 1e-5, "sup error " + num(worst));
  if (o.pass) o.detail = "sup error " + num(worst);
  return o;
}

// Neumann iterates of one left-chart step for the point-mass gradient; the truncation error after
// N terms is measured against the Aitken-extrapolated full sum.
Outcome truncation_order() {
  Outcome o;
  const auto chart = wf::local_chart(DriftSpec::mutation(1.0, 1.0), wf::ChartEnd::left);
  const double b = chart.b_index, y0 = 0.1;
  auto dg = [b, y0](double z, double s) { return -model::k_density(b + 1, s, z, y0); };
  const int terms = 6;
  std::vector<double> lt;
  std::vector<std::vector<double>> le(3);
  for (int k = 0; k < 5; ++k) {
    const double t = 1e-3 * std::pow(10.0, k / 2.0);
    std::vector<double> X;
    for (int i = -10; i <= 10; ++i) {
      const double u = std::sqrt(y0) + i * 0.3 * std::sqrt(t);
      if (u > 0) X.push_back(u * u);
    }
    const Eigen::MatrixXd G = perturbation::neumann_iterates_concentrated(b, chart.h, dg, y0, t, terms, X);
    std::vector<double> err(3, 0.0);
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      std::vector<double> S(terms + 1, 0.0);
      for (int j = 1; j <= terms; ++j) S[j] = S[j - 1] + G(i, j - 1);
      const double d1 = S[terms] - S[terms - 1], d0 = S[terms - 1] - S[terms - 2];
      const double ref = d1 == d0 ? S[terms] : S[terms] - d1 * d1 / (d1 - d0);
      for (int N = 0; N < 3; ++N) err[N] = std::max(err[N], std::abs(ref - S[N]));
    }
    lt.push_back(std::log(t));
    for (int N = 0; N < 3; ++N) le[N].push_back(std::log(err[N]));
  }
  std::string slopes;
  for (int N = 0; N < 3; ++N) {
    const double s = fit_slope(lt, le[N]), expect = (N + 1) / 2.0;
    o.require(std::abs(s - expect) <= 0.3, "N=" + std::to_string(N) + " slope " + num(s));
    slopes += (N ? ", " : "") + std::string("N=") + std::to_string(N) + ": " + num(s);
  }
  if (o.pass) o.detail = "slopes " + slopes;
  return o;
}

double pair_density(const wf::SolutionMeasure& m, const numerics::Function& f) {
  const auto gj = numerics::gauss_jacobi(80, m.alpha1, m.alpha0);
  const double scale = std::pow(2.0, -(m.alpha0 + m.alpha1 + 1.0));
  double s = m.atom0 * f(0.0) + m.atom1 * f(1.0);
  for (std::size_t q = 0; q < gj.size(); ++q) {
    const double y = 0.5 * (1.0 + gj.x[q]);
    s += scale * gj.w[q] * f(y) * m.density_at(y) / (std::pow(y, m.alpha0) * std::pow(1.0 - y, m.alpha1));
  }
  return s;
}

Outcome stationarity_duality() {
  Outcome o;
  const double t = 0.1, tol = 1e-6;
  const std::vector<std::pair<double, std::function<double(double)>>> beta{
      {1.0, [](double) { return 1.0; }},
      {2.0, [](double y) { return 12 * y * (1 - y) * (1 - y); }},
  };
  const std::vector<std::pair<double, double>> params{{1, 1}, {2, 3}};
  double worst_s = 0, worst_d = 0;
  for (std::size_t c = 0; c < params.size(); ++c) {
    const auto d = DriftSpec::mutation(params[c].first, params[c].second);
    const auto& v0 = beta[c].second;
    const auto m = wf::solve_forward(d, v0, t);
    double e = 0, scale = 0;
    for (int k = 1; k < 100; ++k) {
      e = std::max(e, std::abs(m.density_at(k / 100.0) - v0(k / 100.0)));
      scale = std::max(scale, v0(k / 100.0));
    }
    e /= std::max(1.0, scale);
    worst_s = std::max(worst_s, e);

    // <Q_t f, g> by Gauss-Legendre on the backward side; the forward side runs at half the step
    const auto gl = numerics::gauss_legendre(64, 0.0, 1.0);
    const numerics::Grid nodes(gl.x, Domain::unit());
    const auto u = wf::solve_backward(d, [](double y) { return y * y * y; }, t, nodes, tol);
    double lhs = 0;
    for (std::size_t q = 0; q < gl.size(); ++q) lhs += gl.w[q] * u.values[q] * (1 + gl.x[q]);
    wf::SolverOptions half;
    half.tau_max /= 2;
    const auto mg = wf::solve_forward(d, [](double y) { return 1 + y; }, t, {}, half);
    worst_d = std::max(worst_d, std::abs(lhs - pair_density(mg, [](double y) { return y * y * y; })));
  }
  o.require(worst_s <= 1e-6, "stationarity error " + num(worst_s));
  o.require(worst_d <= 3 * tol, "duality gap " + num(worst_d));
  if (o.pass) o.detail = "stationarity " + num(worst_s) + ", duality gap " + num(worst_d);
  return o;
}

Outcome spectrum() {
  Outcome o;
  int mismatches = 0;
  double resid = 0;
  for (auto [b0, b1] : std::vector<std::pair<double, double>>{{0, 0}, {1, 1}, {2, 3}, {0.5, 1.5}}) {
    const auto d = DriftSpec::mutation(b0, b1);
    const auto sp = spectral::polynomial_spectrum(d, 8);
    for (int n = 0; n <= 8; ++n) {
      if (sp.lambda[n] != -n * (n - 1 + b0 + b1)) ++mismatches;
      const Poly p{sp.eigenvectors[n]};
      const Poly Lp = oracles::apply_wf_operator(d, p);
      for (double x : {0.15, 0.5, 0.85}) resid = std::max(resid, std::abs(Lp(x) - sp.lambda[n] * p(x)));
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " eigenvalues differ from -n(n-1+b0+b1)");
  o.require(resid <= 1e-8, "eigenvector residual " + num(resid));
  const auto e0 = spectral::spectral_gap_estimate(DriftSpec::polynomial({0.0}), [](double y) { return y * y; }, 0.5, 2.0);
  const auto e1 = spectral::spectral_gap_estimate(DriftSpec::mutation(1, 1), [](double y) { return y; }, 0.5, 2.0);
  o.require(std::abs(e0.lambda1 + 2) <= 0.1, "gap (0,0) " + num(e0.lambda1));
  o.require(std::abs(e1.lambda1 + 2) <= 0.1, "gap (1,1) " + num(e1.lambda1));
  if (o.pass) o.detail = "gaps " + num(e0.lambda1) + " (0,0), " + num(e1.lambda1) + " (1,1)";
  return o;
}

Outcome absorption() {
  Outcome o;
  const auto d = DriftSpec::polynomial({0.0});
  const double w = 0.05;
  std::string detail;
  for (double x0 : {0.25, 0.5}) {
    auto g = [x0, w](double y) {
      const double u = (y - x0) / w;
      return std::abs(u) < 1 ? 35.0 / (32.0 * w) * std::pow(1 - u * u, 3) : 0.0;
    };
    const std::vector<double> breaks{x0 - w, x0 + w};
    const auto m = wf::solve_forward(d, g, 10.0, breaks);
    const double gap = std::max(std::abs(m.atom0 - (1 - x0)), std::abs(m.atom1 - x0));
    o.require(gap <= 1e-3, "x0=" + num(x0) + " atoms (" + num(m.atom0) + ", " + num(m.atom1) + ")");
    std::vector<double> lt, lm;
    for (double t : {0.8, 1.6, 3.2, 6.4}) {
      const auto mt = wf::solve_forward(d, g, t, breaks);
      lt.push_back(t);
      lm.push_back(std::log(std::abs(mt.mass() - mt.atom0 - mt.atom1)));
    }
    const double rate = fit_slope(lt, lm);
    o.require(std::abs(rate + 2) <= 0.1, "x0=" + num(x0) + " decay rate " + num(rate));
    detail += (detail.empty() ? "" : ", ") + std::string("x0=") + num(x0) + ": atom gap " + num(gap) + " rate " + num(rate);
  }
  if (o.pass) o.detail = detail;
  return o;
}

Outcome monte_carlo() {
  Outcome o;
  const std::int64_t N = 5000, R = 200000;
  const double t = 0.2, x0 = 0.3;
  const auto chain = oracles::mc_wright_fisher(oracles::chain_for_diffusion(2, 3, 0, N, t, x0, R, 2024));
  const auto m = wf::solve_forward_point(DriftSpec::mutation(2, 3), x0, t);
  const double ks = oracles::ks_distance(chain, m);
  o.require(ks <= 0.01, "KS " + num(ks));

  const double xf = 0.25;
  const std::int64_t Rf = 20000;
  const auto fix = oracles::mc_wright_fisher(oracles::chain_for_diffusion(0, 0, 0, 200, 10.0, xf, Rf, 77));
  const double se = std::sqrt(xf * (1 - xf) / Rf);
  o.require(std::abs(fix.atom1() - xf) <= 3 * se, "fixation " + num(fix.atom1()) + " vs " + num(xf));
  if (o.pass) o.detail = "KS " + num(ks) + ", fixation " + num(fix.atom1()) + " (3 SE " + num(3 * se) + ")";
  return o;
}

Outcome max_principle() {
  Outcome o;
  const std::vector<DriftSpec> drifts{DriftSpec::mutation(1, 1), DriftSpec::mutation(2, 3),
                                      DriftSpec::polynomial({0.0}), DriftSpec::genetics(0.5, 0.8, 3.0)};
  const oracles::Philox rng(12);
  const auto grid = numerics::uniform_grid(0, 1, 101, Domain::unit());
  const std::vector<double> times{0.0, 0.05, 0.1, 0.2};
  int violations = 0;
  double worst = 0;
  for (int r = 0; r < 100; ++r) {
    const auto& d = drifts[r % drifts.size()];
    const auto u = rng({static_cast<std::uint32_t>(r), 0, 0, 0});
    const Poly f{{2 * oracles::Philox::uniform(u[0]) - 1, 2 * oracles::Philox::uniform(u[1]) - 1,
                  4 * oracles::Philox::uniform(u[2]) - 2, 4 * oracles::Philox::uniform(u[3]) - 2}};
    std::vector<double> vals;
    double sup0 = 0;
    for (double x : grid.nodes()) {
      vals.push_back(f(x));
      sup0 = std::max(sup0, std::abs(f(x)));
    }
    double prev = sup0;
    bool grew = false;
    for (std::size_t k = 1; k < times.size(); ++k) {
      const auto s = wf::solve_backward(d, f, times[k], grid);
      double sup = 0;
      for (double v : s.values) sup = std::max(sup, std::abs(v));
      grew = grew || sup > prev + 1e-9;
      worst = std::max(worst, sup - prev);
      prev = sup;
      vals.insert(vals.end(), s.values.begin(), s.values.end());
    }
    const auto mp = oracles::max_principle_check(perturbation::SpaceTimeField(grid, times, vals), 1e-9);
    if (grew || !mp.ok) ++violations;
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  if (o.pass) o.detail = "0 violations in 100 runs, largest sup-norm change " + num(worst);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "degenheat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome reproducibility() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("degenheat_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream init(dir / "f.csv");
    init << "x,value\n";
    for (int i = 0; i <= 40; ++i) init << csv::format(i / 40.0) << ',' << csv::format(std::sin(3 * i / 40.0)) << '\n';
    std::ofstream cfg(dir / "run.ini");
    cfg << "drift = mu12=2,mu21=3\n[validate.mc]\nN = 500\nt = 0.1\nreplicates = 20000\nseed = 31\nks-max = 1\n";
  }
  int identical = 0, total = 0;
  auto twice = [&](const std::string& tag, const std::function<std::vector<std::string>(const fs::path&)>& args) {
    const fs::path a = dir / (tag + "_1.csv"), b = dir / (tag + "_2.csv");
    const int ca = run_cli(args(a)), cb = run_cli(args(b));
    ++total;
    const std::string sa = slurp(a);
    if (ca == 0 && cb == 0 && !sa.empty() && sa == slurp(b)) ++identical;
    else o.require(false, tag + " differs or failed");
  };
  const std::string cfg = (dir / "run.ini").string(), init = (dir / "f.csv").string();
  twice("mc", [&](const fs::path& p) {
    return std::vector<std::string>{"--config", cfg, "validate", "mc", "--out", p.string()};
  });
  twice("kernel", [&](const fs::path& p) {
    return std::vector<std::string>{"kernel", "--wf", "--drift", "b0=1,b1=2", "--t", "0.05", "--grid", "12",
                                    "--out", p.string()};
  });
  twice("backward", [&](const fs::path& p) {
    return std::vector<std::string>{"solve", "backward", "--drift", "mu12=1,mu21=1,s=2", "--init", init, "--t", "0.1",
                                    "--out", p.string()};
  });
  twice("forward", [&](const fs::path& p) {
    return std::vector<std::string>{"solve", "forward", "--drift", "b0=2,b1=3", "--init", init, "--t", "0.1",
                                    "--out", p.string()};
  });
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(identical) + "/" + std::to_string(total) + " outputs byte-identical";
  return o;
}

}  // namespace

int main() {
  run_criterion(1, "psi special function", 1.0, psi_ode);
  run_criterion(2, "kernel mass and positivity", 10.0, kernel_mass_positivity);
  run_criterion(3, "Chapman-Kolmogorov", 30.0, chapman_kolmogorov);
  run_criterion(4, "polynomial exactness", 0.0, polynomial_exactness);
  run_criterion(5, "derivative transfer", 0.0, derivative_transfer_fd);
  run_criterion(6, "closed-form solution", 60.0, closed_form_solution);
  run_criterion(7, "truncation order", 300.0, truncation_order);
  run_criterion(8, "stationarity and duality", 0.0, stationarity_duality);
  run_criterion(9, "spectrum", 0.0, spectrum);
  run_criterion(10, "absorption", 0.0, absorption);
  run_criterion(11, "Monte Carlo agreement", 300.0, monte_carlo);
  run_criterion(12, "maximum principle", 0.0, max_principle);
  run_criterion(13, "reproducibility", 0.0, reproducibility);
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
