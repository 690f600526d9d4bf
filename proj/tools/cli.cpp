#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include "degenheat/csv.hpp"
#include "degenheat/error.hpp"
#include "degenheat/model_kernel.hpp"
#include "degenheat/oracles.hpp"
#include "degenheat/spectral.hpp"

namespace degenheat::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::usage, what + ": '" + s + "' is not a number");
  }
  require(used == s.size() && std::isfinite(v), ErrorKind::usage, what + ": '" + s + "' is not a number");
  return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_number(item, what));
  require(!out.empty(), ErrorKind::usage, what + ": empty list");
  return out;
}

std::vector<double> midpoints(int n, double hi) {
  require(n >= 1, ErrorKind::usage, "--grid must be positive");
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = (i + 0.5) * hi / n;
  return x;
}

numerics::Grid unit_midpoint_grid(int n) {
  require(n >= 8, ErrorKind::usage, "--grid must be at least 8");
  return numerics::Grid(midpoints(n, 1.0), numerics::Domain::unit());
}

/// Output sink: a file, or standard output for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& stdout_stream) : path_(path) {
    if (path == "-") {
      os_ = &stdout_stream;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      require(file_->good(), ErrorKind::input, "cannot open '" + path + "' for writing");
      os_ = file_.get();
    }
  }
  std::ostream& stream() { return *os_; }
  bool is_stdout() const { return path_ == "-"; }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

/// Coefficients (mu12, mu21, s) of a drift of degree <= 2.
struct GeneticsParams {
  double mu12, mu21, s;
};

GeneticsParams genetics_params(const wf::DriftSpec& d) {
  require(d.is_polynomial() && d.degree() <= 2, ErrorKind::usage,
          "the chain needs a drift of the form mu12 (1-x) - mu21 x + s x (1-x)");
  std::vector<double> c = d.coefficients();
  c.resize(3, 0.0);
  const double mu12 = c[0], s = -c[2];
  return {mu12, -c[1] - mu12 + s, s};
}

model::Poly parse_poly(const std::string& s) {
  return model::Poly{parse_list(s, "--f")};
}

// ---------------------------------------------------------------- report

struct Report {
  std::ostream& os;
  bool all = true;
  void line(bool ok, const std::string& name, const std::string& detail) {
    all = all && ok;
    os << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
  }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- config plumbing

/// Fills options that were not given on the command line from the config file.
void apply_config(const ConfigFile& cfg, CLI::App* app, const std::string& section) {
  const auto& sec = cfg.sections.find(section);
  if (sec != cfg.sections.end()) {
    for (const auto& [key, entry] : sec->second) {
      bool known = false;
      for (const CLI::Option* opt : app->get_options())
        for (const auto& n : opt->get_lnames()) known = known || n == key;
      bool is_sub = false;
      for (const CLI::App* sub : app->get_subcommands({})) is_sub = is_sub || sub->get_name() == key;
      if (!known && !is_sub)
        fail(ErrorKind::input,
             cfg.source + ":" + std::to_string(entry.line) + ": unknown key '" + key + "' in [" + section + "]");
    }
  }
  for (CLI::Option* opt : app->get_options()) {
    if (opt->count() > 0 || opt->get_lnames().empty()) continue;
    const std::string& key = opt->get_lnames().front();
    if (key == "help" || key == "config") continue;
    if (const auto* e = cfg.find(section, key)) {
      try {
        opt->add_result(e->value);
        opt->run_callback();
      } catch (const CLI::Error& ex) {
        fail(ErrorKind::input, cfg.source + ":" + std::to_string(e->line) + ": " + key + ": " + ex.what());
      }
    }
  }
}

// ---------------------------------------------------------------- commands

struct SolverFlags {
  double tol = 1e-6;
  int degree = 48;
  wf::SolverOptions options() const {
    require(tol > 0.0, ErrorKind::usage, "--tol must be positive");
    require(degree >= 8 && degree <= 128, ErrorKind::usage, "--degree must lie in [8, 128]");
    wf::SolverOptions o;
    o.tol = tol;
    o.degree = degree;
    return o;
  }
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--tol", f.tol, "error budget of the solver")->capture_default_str();
  app->add_option("--degree", f.degree, "Chebyshev degree of the solver state")->capture_default_str();
}

struct KernelArgs {
  std::string model, drift, t, x, y, out = "-";
  bool wf = false;
  int grid = 0;
  double xmax = 4.0;
  SolverFlags solver;
};

int cmd_kernel(const KernelArgs& a, std::ostream& out) {
  require(a.wf != !a.model.empty(), ErrorKind::usage, "kernel: give exactly one of --model b=... or --wf");
  require(!a.t.empty(), ErrorKind::usage, "kernel: --t is required");
  const auto ts = parse_list(a.t, "--t");
  for (double t : ts) require(t > 0.0, ErrorKind::usage, "kernel: t > 0 required");
  const double hi = a.wf ? 1.0 : a.xmax;
  auto axis = [&](const std::string& list, const char* name) {
    if (!list.empty()) return parse_list(list, name);
    require(a.grid > 0, ErrorKind::usage, std::string("kernel: give ") + name + " or --grid");
    return midpoints(a.grid, hi);
  };
  const auto xs = axis(a.x, "--x"), ys = axis(a.y, "--y");
  for (double v : xs) require(v >= 0.0 && v <= hi, ErrorKind::usage, "kernel: x outside the domain");
  for (double v : ys) require(v >= 0.0 && v <= hi, ErrorKind::usage, "kernel: y outside the domain");

  Sink sink(a.out, out);
  std::ostream& os = sink.stream();
  os << "x,y,t,value\n";
  if (!a.wf) {
    const auto kv = split(a.model, '=');
    require(kv.size() == 2 && kv[0] == "b", ErrorKind::usage, "kernel: --model expects b=<value>");
    const double b = parse_number(kv[1], "--model");
    require(b >= 0.0, ErrorKind::usage, "kernel: b >= 0 required");
    for (double t : ts) {
      for (double x : xs) {
        if (b == 0.0) os << "# atom at y=0: x=" << csv::format(x) << ",t=" << csv::format(t) << ",weight="
                         << csv::format(model::k_atom(0.0, t, x)) << "\n";
        for (double y : ys)
          os << csv::format(x) << ',' << csv::format(y) << ',' << csv::format(t) << ','
             << csv::format(model::k_density(b, t, x, y)) << '\n';
      }
    }
    return 0;
  }
  require(!a.drift.empty(), ErrorKind::usage, "kernel --wf: --drift is required");
  const auto d = parse_drift(a.drift);
  for (double t : ts) {
    const Eigen::MatrixXd q = wf::wf_kernel(d, t, xs, ys, a.solver.options());
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j)
        os << csv::format(xs[i]) << ',' << csv::format(ys[j]) << ',' << csv::format(t) << ','
           << csv::format(q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
  }
  return 0;
}

struct SolveArgs {
  std::string drift, init, out = "-";
  double t = 0.0;
  SolverFlags solver;
};

int cmd_solve(const SolveArgs& a, bool forward, std::ostream& out, std::ostream& err) {
  require(!a.drift.empty() && !a.init.empty(), ErrorKind::usage, "solve: --drift and --init are required");
  require(a.t > 0.0, ErrorKind::usage, "solve: t > 0 required");
  const auto d = parse_drift(a.drift);
  const auto f = csv::read_field_file(a.init);
  const auto opt = a.solver.options();
  Sink sink(a.out, out);
  std::ostream& summary = sink.is_stdout() ? err : out;
  if (!forward) {
    const auto u = wf::solve_backward(d, f, a.t, opt.tol, opt);
    csv::write_field(sink.stream(), u);
    std::vector<double> vals(f.values);
    vals.insert(vals.end(), u.values.begin(), u.values.end());
    const auto rep = oracles::max_principle_check(perturbation::SpaceTimeField(f.grid, {0.0, a.t}, vals));
    summary << "sup|u| = " << csv::format(u.sup_norm()) << "\n";
    summary << "max principle: " << (rep.ok ? "ok" : "VIOLATED " + rep.message) << " (range [" << csv::format(rep.slab_min)
            << ", " << csv::format(rep.slab_max) << "])\n";
    return 0;
  }
  const auto m = wf::solve_forward(d, f, a.t, opt);
  csv::write_measure(sink.stream(), m);
  double lo = 0.0;
  for (double v : m.density.values) lo = std::min(lo, v);
  summary << "mass = " << csv::format(m.mass()) << "\n";
  summary << "atom0 = " << csv::format(m.atom0) << ", atom1 = " << csv::format(m.atom1) << "\n";
  summary << "min density = " << csv::format(lo) << "\n";
  return 0;
}

struct StationaryArgs {
  std::string drift, out = "-";
  int grid = 101;
};

int cmd_stationary(const StationaryArgs& a, std::ostream& out, std::ostream& err) {
  require(!a.drift.empty(), ErrorKind::usage, "stationary: --drift is required");
  const auto v = spectral::stationary_density(parse_drift(a.drift));
  const auto grid = unit_midpoint_grid(a.grid);
  Sink sink(a.out, out);
  csv::write_field(sink.stream(), v.sample(grid));
  double flux = 0.0;
  for (double x : grid.nodes()) flux = std::max(flux, std::abs(v.flux_residual(x)));
  std::ostream& summary = sink.is_stdout() ? err : out;
  summary << "normalization = " << csv::format(v.norm) << "\n";
  summary << "max flux residual = " << csv::format(flux) << "\n";
  return 0;
}

struct SpectrumArgs {
  std::string drift, out = "-";
  int nmax = 4;
  bool gap = false;
  double t0 = 0.2, t1 = 1.0;
  SolverFlags solver;
};

int cmd_spectrum(const SpectrumArgs& a, std::ostream& out, std::ostream& err) {
  require(!a.drift.empty(), ErrorKind::usage, "spectrum: --drift is required");
  require(a.nmax >= 0, ErrorKind::usage, "spectrum: --nmax must be >= 0");
  const auto d = parse_drift(a.drift);
  Sink sink(a.out, out);
  std::ostream& os = sink.stream();
  std::ostream& summary = sink.is_stdout() ? err : out;
  if (d.is_linear()) {
    const auto sp = spectral::polynomial_spectrum(d, a.nmax);
    os << "n,lambda\n";
    for (std::size_t n = 0; n < sp.lambda.size(); ++n) os << n << ',' << csv::format(sp.lambda[n]) << '\n';
  } else {
    require(a.gap, ErrorKind::usage, "spectrum: the drift is not linear; use --gap for a fitted estimate");
  }
  if (a.gap) {
    require(a.t0 > 0.0 && a.t1 > a.t0, ErrorKind::usage, "spectrum: need 0 < --t0 < --t1");
    const auto est = spectral::spectral_gap_estimate(d, [](double y) { return y; }, a.t0, a.t1, a.solver.options());
    summary << "lambda1 (fit) = " << csv::format(est.lambda1) << " over [" << csv::format(est.t_start) << ", "
            << csv::format(est.t_end) << "], rms misfit " << csv::format(est.residual) << "\n";
  }
  return 0;
}

struct ValidateArgs {
  std::string drift, out = "-", f;
  std::int64_t N = 5000, replicates = 200000;
  std::uint64_t seed = 1;
  double t = 0.2, x0 = 0.3, ks_max = 0.01;
  int bins = 50, grid = 101, steps = 400, l = 2, runs = 20;
  SolverFlags solver;
};

int validate_mc(const ValidateArgs& a, std::ostream& out, int threads) {
  const auto d = parse_drift(a.drift.empty() ? "mu12=2,mu21=3" : a.drift);
  const auto g = genetics_params(d);
  require(a.N >= 100, ErrorKind::usage, "validate mc: --N must be >= 100");
  require(a.replicates >= 1, ErrorKind::usage, "validate mc: --replicates must be positive");
  require(a.t > 0.0, ErrorKind::usage, "validate mc: t > 0 required");
  require(a.x0 >= 0.0 && a.x0 <= 1.0, ErrorKind::usage, "validate mc: --x0 must lie in [0,1]");
  const auto params = oracles::chain_for_diffusion(g.mu12, g.mu21, g.s, a.N, a.t, a.x0, a.replicates, a.seed);
  const auto chain = oracles::mc_wright_fisher(params, threads);
  const auto m = wf::solve_forward_point(d, a.x0, a.t, a.solver.options());
  if (a.out != "-") {
    Sink sink(a.out, out);
    csv::write_histogram(sink.stream(), chain.histogram(a.bins));
  }
  Report rep{out};
  const double ks = oracles::ks_distance(chain, m);
  rep.line(ks <= a.ks_max, "ks", "distance " + num(ks) + " (limit " + num(a.ks_max) + "), " +
                                    std::to_string(params.generations) + " generations");
  const double R = static_cast<double>(a.replicates);
  for (int end : {0, 1}) {
    const double p = end == 0 ? m.atom0 : m.atom1, got = end == 0 ? chain.atom0() : chain.atom1();
    if ((end == 0 ? d.b0() : d.b1()) > 0.0) continue;
    const double se = std::sqrt(std::max(p * (1 - p), 1.0 / R) / R);
    rep.line(std::abs(got - p) <= 3 * se, end == 0 ? "atom0" : "atom1",
             "chain " + num(got) + " vs solver " + num(p) + " (3 SE = " + num(3 * se) + ")");
  }
  return rep.all ? 0 : 4;
}

int validate_fd(const ValidateArgs& a, std::ostream& out) {
  const auto d = parse_drift(a.drift.empty() ? "b0=1,b1=1" : a.drift);
  const auto f = parse_poly(a.f.empty() ? "0,0,0,1" : a.f);
  require(a.t > 0.0, ErrorKind::usage, "validate fd: t > 0 required");
  require(a.grid >= 16 && a.steps >= 4, ErrorKind::usage, "validate fd: need --grid >= 16 and --steps >= 4");
  const auto opt = a.solver.options();
  Report rep{out};
  std::vector<double> errs;
  for (int k = 2; k >= 0; --k) {
    const std::size_t n = static_cast<std::size_t>((a.grid - 1) >> k) + 1;
    const auto grid = numerics::uniform_grid(0.0, 1.0, n, numerics::Domain::unit());
    const auto fd = oracles::fd_solve(d, f, a.t, grid, {a.steps >> k, 4});
    const auto ref = wf::solve_backward(d, f, a.t, grid, opt.tol, opt);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::abs(fd.values[i] - ref.values[i]));
    errs.push_back(e);
  }
  rep.line(errs.back() <= 1e-3, "agreement", "sup |fd - solver| = " + num(errs.back()) + " (limit 0.001)");
  const double order = std::log2(errs[0] / errs[2]) / 2.0;
  rep.line(order >= 1.0 || errs.back() <= 10 * opt.tol, "order",
           "observed order " + num(order) + " under joint refinement (limit 1)");
  return rep.all ? 0 : 4;
}

int validate_series(const ValidateArgs& a, std::ostream& out) {
  const auto d = parse_drift(a.drift.empty() ? "c0=0" : a.drift);
  const auto f = parse_poly(a.f.empty() ? "0,0,1" : a.f);
  require(a.l >= 1 && a.l <= 12, ErrorKind::usage, "validate series: --l must lie in [1, 12]");
  const auto grid = numerics::uniform_grid(0.0, 1.0, 21, numerics::Domain::unit());
  Report rep{out};
  std::vector<double> lt, le;
  bool bounded = true;
  for (int k = 0; k < 5; ++k) {
    const double t = 1e-3 * std::pow(10.0, k / 4.0);
    const auto s = oracles::series_solution(d, f, t, a.l, grid);
    const auto ref = oracles::series_solution(d, f, t, 40, grid);
    double e = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) e = std::max(e, std::abs(s.value.values[i] - ref.value.values[i]));
    bounded = bounded && e <= s.remainder_bound * (1 + 1e-12) + 1e-15;
    require(e > 0.0, ErrorKind::numerical, "validate series: the partial sum is exact for this data; raise the degree of --f");
    lt.push_back(std::log(t));
    le.push_back(std::log(e));
  }
  const double mt = (lt.front() + lt.back()) / 2;
  double sxy = 0, sxx = 0, my = 0;
  for (double v : le) my += v / static_cast<double>(le.size());
  for (std::size_t k = 0; k < lt.size(); ++k) {
    sxy += (lt[k] - mt) * (le[k] - my);
    sxx += (lt[k] - mt) * (lt[k] - mt);
  }
  const double slope = sxy / sxx;
  rep.line(std::abs(slope - a.l) <= 0.2, "slope", "log-log slope " + num(slope) + " (expected " + std::to_string(a.l) + " +- 0.2)");
  rep.line(bounded, "remainder", bounded ? "error within the remainder bound" : "error exceeds the remainder bound");
  return rep.all ? 0 : 4;
}

/// Integral of f against the reconstructed density (Gauss-Jacobi in its endpoint weights) plus the atoms.
double integrate_against(const wf::SolutionMeasure& m, const numerics::Function& f) {
  const auto gj = numerics::gauss_jacobi(80, m.alpha1, m.alpha0);
  const double scale = std::pow(2.0, -(m.alpha0 + m.alpha1 + 1.0));
  double s = m.atom0 * f(0.0) + m.atom1 * f(1.0);
  for (std::size_t q = 0; q < gj.size(); ++q) {
    const double y = 0.5 * (1.0 + gj.x[q]);
    s += scale * gj.w[q] * f(y) * m.density_at(y) / (std::pow(y, m.alpha0) * std::pow(1.0 - y, m.alpha1));
  }
  return s;
}

int validate_invariants(const ValidateArgs& a, std::ostream& out) {
  const auto d = parse_drift(a.drift.empty() ? "b0=1,b1=1" : a.drift);
  require(a.t > 0.0, ErrorKind::usage, "validate invariants: t > 0 required");
  require(a.runs >= 1, ErrorKind::usage, "validate invariants: --runs must be positive");
  const auto opt = a.solver.options();
  Report rep{out};

  const auto m = wf::solve_forward(d, [](double) { return 1.0; }, a.t, {}, opt);
  rep.line(std::abs(m.mass() - 1.0) <= 1e-8, "mass", "forward mass " + csv::format(m.mass()));

  const auto one = wf::solve_backward_nodes(d, [](double) { return 1.0; }, a.t, opt.tol, opt);
  double dev = 0.0;
  for (double v : one) dev = std::max(dev, std::abs(v - 1.0));
  rep.line(dev <= 1e-8, "constants", "sup |Q_t 1 - 1| = " + num(dev));

  // random cubic data from the counter-based generator
  const oracles::Philox rng(a.seed);
  const auto grid = numerics::uniform_grid(0.0, 1.0, 101, numerics::Domain::unit());
  int violations = 0;
  double worst = 0.0;
  for (int r = 0; r < a.runs; ++r) {
    const auto w = rng({static_cast<std::uint32_t>(r), 0x6d70u, 0, 0});
    model::Poly f{{2 * oracles::Philox::uniform(w[0]) - 1, 2 * oracles::Philox::uniform(w[1]) - 1,
                   2 * oracles::Philox::uniform(w[2]) - 1, 2 * oracles::Philox::uniform(w[3]) - 1}};
    std::vector<double> times{0.0}, vals;
    for (double x : grid.nodes()) vals.push_back(f(x));
    for (double frac : {0.25, 0.5, 1.0}) {
      const auto u = wf::solve_backward(d, f, frac * a.t, grid, opt.tol, opt);
      times.push_back(frac * a.t);
      vals.insert(vals.end(), u.values.begin(), u.values.end());
    }
    const auto mp = oracles::max_principle_check(perturbation::SpaceTimeField(grid, times, vals));
    if (!mp.ok) ++violations;
    worst = std::max(worst, mp.excess);
  }
  rep.line(violations == 0, "max-principle",
           std::to_string(violations) + " violations in " + std::to_string(a.runs) + " runs (worst excess " + num(worst) + ")");

  // duality: <Q_t f, g> = <f, Q_t' g> for f = x^2, g = 1 + x; the forward side uses half the step
  // so the two sides come from different discretizations
  const auto gl = numerics::gauss_legendre(64, 0.0, 1.0);
  const numerics::Grid glg(gl.x, numerics::Domain::unit());
  const auto u = wf::solve_backward(d, [](double y) { return y * y; }, a.t, glg, opt.tol, opt);
  double lhs = 0.0;
  for (std::size_t q = 0; q < gl.size(); ++q) lhs += gl.w[q] * u.values[q] * (1 + gl.x[q]);
  auto half = opt;
  half.tau_max = opt.tau_max / 2;
  const auto mg = wf::solve_forward(d, [](double y) { return 1 + y; }, a.t, {}, half);
  const double rhs = integrate_against(mg, [](double y) { return y * y; });
  rep.line(std::abs(lhs - rhs) <= 3 * opt.tol, "duality",
           "|<Q_t f, g> - <f, Q_t' g>| = " + num(std::abs(lhs - rhs)) + " (limit " + num(3 * opt.tol) + ")");

  if (d.b0() > 0.0 && d.b1() > 0.0) {
    const auto v0 = spectral::stationary_density(d);
    const auto ms = wf::solve_forward(d, [&](double y) { return v0(y); }, a.t, {}, opt);
    double e = 0.0, scale = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double y = k / 100.0;
      e = std::max(e, std::abs(ms.density_at(y) - v0(y)));
      scale = std::max(scale, std::abs(v0(y)));
    }
    rep.line(e <= 1e-6 * std::max(1.0, scale), "stationarity", "sup |Q_t' v0 - v0| = " + num(e));
  }
  return rep.all ? 0 : 4;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage:
    case ErrorKind::domain:
      return 2;
    case ErrorKind::input:
      return 3;
    case ErrorKind::numerical:
      return 4;
  }
  return 4;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage:
    case ErrorKind::domain:
      return "usage";
    case ErrorKind::input:
      return "input";
    case ErrorKind::numerical:
      return "numerical";
  }
  return "error";
}

}  // namespace

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
  std::string s = section;
  while (true) {
    const auto it = sections.find(s);
    if (it != sections.end()) {
      const auto e = it->second.find(key);
      if (e != it->second.end()) return &e->second;
    }
    if (s.empty()) return nullptr;
    const auto dot = s.rfind('.');
    s = dot == std::string::npos ? "" : s.substr(0, dot);
  }
}

ConfigFile read_config(std::istream& is, const std::string& source) {
  ConfigFile cfg;
  cfg.source = source;
  cfg.sections[""];
  std::string section, raw;
  int lineno = 0;
  auto error = [&](const std::string& msg) { fail(ErrorKind::input, source + ":" + std::to_string(lineno) + ": " + msg); };
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') error("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) error("empty section name");
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) error("expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) error("empty key");
    auto& sec = cfg.sections[section];
    if (sec.count(key)) error("duplicate key '" + key + "'");
    sec[key] = {value, lineno};
  }
  return cfg;
}

wf::DriftSpec parse_drift(const std::string& text) {
  std::map<std::string, double> kv;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, ErrorKind::usage, "--drift: expected key=value, got '" + item + "'");
    const std::string key = trim(item.substr(0, eq));
    require(!kv.count(key), ErrorKind::usage, "--drift: repeated key '" + key + "'");
    kv[key] = parse_number(trim(item.substr(eq + 1)), "--drift " + key);
  }
  require(!kv.empty(), ErrorKind::usage, "--drift: empty specification");
  auto only = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : kv) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) return false;
    }
    return true;
  };
  if (only({"b0", "b1"})) return wf::DriftSpec::mutation(kv["b0"], kv["b1"]);
  if (only({"mu12", "mu21", "s"})) return wf::DriftSpec::genetics(kv["mu12"], kv["mu21"], kv["s"]);
  std::vector<double> c;
  for (const auto& [k, v] : kv) {
    require(k.size() >= 2 && k[0] == 'c' && std::all_of(k.begin() + 1, k.end(), ::isdigit), ErrorKind::usage,
            "--drift: unknown key '" + k + "' (use b0,b1 or mu12,mu21,s or c0,c1,...)");
    const std::size_t i = std::stoul(k.substr(1));
    require(i < 32, ErrorKind::usage, "--drift: polynomial degree too large");
    if (c.size() <= i) c.resize(i + 1, 0.0);
    c[i] = v;
  }
  return wf::DriftSpec::polynomial(c);
}

int thread_cap() {
  const int hw = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const char* env = std::getenv("DEGENHEAT_THREADS");
  if (env == nullptr || *env == '\0') return hw;
  const std::string s = env;
  require(std::all_of(s.begin(), s.end(), ::isdigit) && s.size() < 6, ErrorKind::usage,
          "DEGENHEAT_THREADS must be a positive integer");
  const int n = std::stoi(s);
  require(n >= 1, ErrorKind::usage, "DEGENHEAT_THREADS must be a positive integer");
  return std::min(n, hw);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heat kernels, solvers and oracles for Wright-Fisher operators x(1-x)d^2 + b(x)d on [0,1].",
               "degenheat"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value file with [section] headers; flags override it");

  KernelArgs ka;
  auto* kernel = app.add_subcommand("kernel", "Model kernel k_t^b(x,y) or the Wright-Fisher kernel, as x,y,t,value");
  kernel->add_option("--model", ka.model, "model kernel with index b, e.g. b=2");
  kernel->add_flag("--wf", ka.wf, "Wright-Fisher kernel for --drift");
  kernel->add_option("--drift", ka.drift, "drift: b0=..,b1=.. | mu12=..,mu21=..,s=.. | c0=..,c1=..");
  kernel->add_option("--t", ka.t, "time or comma-separated times");
  kernel->add_option("--x", ka.x, "comma-separated x values");
  kernel->add_option("--y", ka.y, "comma-separated y values");
  kernel->add_option("--grid", ka.grid, "n midpoints per axis when --x/--y are absent");
  kernel->add_option("--xmax", ka.xmax, "right end of the model grid")->capture_default_str();
  kernel->add_option("--out", ka.out, "output file, - for standard output")->capture_default_str();
  add_solver_flags(kernel, ka.solver);

  SolveArgs sa;
  auto* solve = app.add_subcommand("solve", "Backward (observables) or forward (densities) evolution");
  solve->require_subcommand(1);
  std::vector<CLI::App*> solve_subs;
  for (const char* name : {"backward", "forward"}) {
    auto* s = solve->add_subcommand(name, std::string(name) + " Kolmogorov equation from an x,value CSV");
    s->add_option("--drift", sa.drift, "drift specification");
    s->add_option("--init", sa.init, "initial data CSV (x,value)");
    s->add_option("--t", sa.t, "final time");
    s->add_option("--out", sa.out, "output file, - for standard output")->capture_default_str();
    add_solver_flags(s, sa.solver);
    solve_subs.push_back(s);
  }

  StationaryArgs sta;
  auto* stationary = app.add_subcommand("stationary", "Stationary density of a drift with b0, b1 > 0");
  stationary->add_option("--drift", sta.drift, "drift specification");
  stationary->add_option("--grid", sta.grid, "number of midpoints")->capture_default_str();
  stationary->add_option("--out", sta.out, "output file, - for standard output")->capture_default_str();

  SpectrumArgs spa;
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues on polynomials and a fitted spectral gap");
  spectrum->add_option("--drift", spa.drift, "drift specification");
  spectrum->add_option("--nmax", spa.nmax, "largest polynomial degree")->capture_default_str();
  spectrum->add_flag("--gap", spa.gap, "also fit lambda_1 from the decay of Q_t x");
  spectrum->add_option("--t0", spa.t0, "start of the fit window")->capture_default_str();
  spectrum->add_option("--t1", spa.t1, "end of the fit window")->capture_default_str();
  spectrum->add_option("--out", spa.out, "output file, - for standard output")->capture_default_str();
  add_solver_flags(spectrum, spa.solver);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Cross-checks against independent oracles; exit 0 iff all pass");
  validate->require_subcommand(1);
  std::vector<CLI::App*> validate_subs;
  for (const char* name : {"mc", "fd", "series", "invariants"}) {
    auto* v = validate->add_subcommand(name);
    v->add_option("--drift", va.drift, "drift specification");
    v->add_option("--t", va.t, "time")->capture_default_str();
    v->add_option("--seed", va.seed, "generator seed")->capture_default_str();
    v->add_option("--out", va.out, "output file, - for standard output")->capture_default_str();
    add_solver_flags(v, va.solver);
    validate_subs.push_back(v);
  }
  validate_subs[0]->description("Wright-Fisher chain against solve_forward (KS distance, absorption)");
  validate_subs[0]->add_option("--N", va.N, "population size")->capture_default_str();
  validate_subs[0]->add_option("--x0", va.x0, "initial frequency")->capture_default_str();
  validate_subs[0]->add_option("--replicates", va.replicates, "number of chains")->capture_default_str();
  validate_subs[0]->add_option("--bins", va.bins, "histogram bins for --out")->capture_default_str();
  validate_subs[0]->add_option("--ks-max", va.ks_max, "largest accepted KS distance")->capture_default_str();
  validate_subs[1]->description("Crank-Nicolson finite differences against solve_backward");
  validate_subs[1]->add_option("--grid", va.grid, "finest grid size")->capture_default_str();
  validate_subs[1]->add_option("--steps", va.steps, "time steps on the finest grid")->capture_default_str();
  validate_subs[1]->add_option("--f", va.f, "data as monomial coefficients");
  validate_subs[2]->description("Truncated series sum t^j L^j f / j!: error slope and remainder bound");
  validate_subs[2]->add_option("--l", va.l, "number of terms")->capture_default_str();
  validate_subs[2]->add_option("--f", va.f, "data as monomial coefficients");
  validate_subs[3]->description("Mass, constants, maximum principle, duality and stationarity");
  validate_subs[3]->add_option("--runs", va.runs, "random maximum-principle runs")->capture_default_str();

  try {
    try {
      std::vector<std::string> args;
      for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
      app.parse(args);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "degenheat: usage: " << e.what() << "\n";
      // help of the deepest selected subcommand
      CLI::App* sel = &app;
      while (!sel->get_subcommands().empty()) sel = sel->get_subcommands().front();
      err << sel->help();
      return 2;
    }

    std::vector<std::pair<CLI::App*, std::string>> chain;
    std::string path;
    for (CLI::App* a = &app; a != nullptr;) {
      chain.emplace_back(a, path);
      const auto subs = a->get_subcommands();
      if (subs.empty()) break;
      a = subs.front();
      path = path.empty() ? a->get_name() : path + "." + a->get_name();
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      require(in.good(), ErrorKind::input, "cannot open config file '" + config_path + "'");
      const ConfigFile cfg = read_config(in, config_path);
      for (auto& [a, section] : chain) {
        if (a == &app) continue;
        apply_config(cfg, a, section);
      }
    }
    const int threads = thread_cap();

    if (kernel->parsed()) return cmd_kernel(ka, out);
    if (solve->parsed()) return cmd_solve(sa, solve_subs[1]->parsed(), out, err);
    if (stationary->parsed()) return cmd_stationary(sta, out, err);
    if (spectrum->parsed()) return cmd_spectrum(spa, out, err);
    if (validate_subs[0]->parsed()) return validate_mc(va, out, threads);
    if (validate_subs[1]->parsed()) return validate_fd(va, out);
    if (validate_subs[2]->parsed()) return validate_series(va, out);
    if (validate_subs[3]->parsed()) return validate_invariants(va, out);
    return 2;
  } catch (const Error& e) {
    err << "degenheat: " << kind_name(e.kind()) << " error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "degenheat: numerical error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace degenheat::cli
