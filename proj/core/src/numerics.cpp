#include "degenheat/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

#include "degenheat/error.hpp"

namespace degenheat::numerics {

// ---------------------------------------------------------------- Grid / SampledField

Grid::Grid(std::vector<double> nodes, Domain domain) : nodes_(std::move(nodes)), domain_(domain) {
  require(nodes_.size() >= 8, ErrorKind::input, "grid: at least 8 nodes required");
  require(nodes_.front() >= 0.0, ErrorKind::input, "grid: first node must be >= 0");
  for (std::size_t i = 1; i < nodes_.size(); ++i)
    require(nodes_[i] > nodes_[i - 1], ErrorKind::input, "grid: nodes must be strictly increasing");
  const double right = domain_.kind == DomainKind::unit_interval ? 1.0 : domain_.truncation;
  require(nodes_.back() <= right * (1.0 + 1e-14), ErrorKind::input, "grid: node outside domain");
}

std::size_t Grid::cell(double x) const {
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  std::size_t i = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return std::min(i, nodes_.size() - 2);
}

SampledField::SampledField(Grid g, std::vector<double> v, int m)
    : grid(std::move(g)), values(std::move(v)), smoothness(m) {
  require(values.size() == grid.size(), ErrorKind::input, "sampled field: length does not match grid");
  for (double y : values) require(std::isfinite(y), ErrorKind::input, "sampled field: non-finite value");
  require(smoothness >= 0, ErrorKind::input, "sampled field: smoothness must be >= 0");
}

SampledField SampledField::sample(const Grid& grid, const std::function<double(double)>& f, int m) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
  return SampledField(grid, std::move(v), m);
}

double SampledField::sup_norm() const {
  double s = 0.0;
  for (double y : values) s = std::max(s, std::abs(y));
  return s;
}

// ---------------------------------------------------------------- grids

Grid uniform_grid(double a, double b, std::size_t n, Domain domain) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  x.back() = b;
  return Grid(std::move(x), domain);
}

namespace {

std::vector<double> geometric_spacings(double length, double h_min, double h_max, double ratio) {
  require(h_min > 0.0 && h_max >= h_min && ratio >= 1.0, ErrorKind::input, "graded grid: bad spacing parameters");
  std::vector<double> s;
  double total = 0.0, h = h_min;
  while (total < length) {
    s.push_back(h);
    total += h;
    h = std::min(h * ratio, h_max);
  }
  for (double& v : s) v *= length / total;
  return s;
}

}  // namespace

Grid graded_unit_grid(double h_min, double h_max, double ratio) {
  auto s = geometric_spacings(0.5, h_min, h_max, ratio);
  std::vector<double> x{0.0};
  for (double h : s) x.push_back(x.back() + h);
  x.back() = 0.5;
  for (auto it = s.rbegin(); it != s.rend(); ++it) x.push_back(x.back() + *it);
  x.back() = 1.0;
  return Grid(std::move(x), Domain::unit());
}

Grid graded_half_line_grid(double right, double h_min, double h_max, double ratio) {
  auto s = geometric_spacings(right, h_min, h_max, ratio);
  std::vector<double> x{0.0};
  for (double h : s) x.push_back(x.back() + h);
  x.back() = right;
  return Grid(std::move(x), Domain::half_line(right));
}

std::vector<double> chebyshev_lobatto(std::size_t n, double a, double b) {
  std::vector<double> x(n + 1);
  for (std::size_t k = 0; k <= n; ++k)
    x[k] = 0.5 * (a + b) - 0.5 * (b - a) * std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  x.front() = a;
  x.back() = b;
  if (n % 2 == 0) x[n / 2] = 0.5 * (a + b);
  return x;
}

// ---------------------------------------------------------------- quadrature

namespace {

Rule legendre_reference(std::size_t n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) { p1 = x; p0 = 1.0; }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) { p1 = x; p0 = 1.0; }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
    }
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

std::mutex g_rule_mutex;

}  // namespace

Rule gauss_legendre(std::size_t n, double a, double b) {
  require(n >= 1, ErrorKind::domain, "gauss_legendre: n must be >= 1");
  static std::map<std::size_t, Rule> cache;
  Rule ref;
  {
    std::lock_guard<std::mutex> lock(g_rule_mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, legendre_reference(n)).first;
    ref = it->second;
  }
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (std::size_t i = 0; i < n; ++i) {
    ref.x[i] = c + h * ref.x[i];
    ref.w[i] *= h;
  }
  return ref;
}

Rule gauss_jacobi(std::size_t n, double alpha, double beta) {
  require(n >= 1 && alpha > -1.0 && beta > -1.0, ErrorKind::domain, "gauss_jacobi: need n >= 1, alpha, beta > -1");
  static std::map<std::tuple<std::size_t, double, double>, Rule> cache;
  const auto key = std::make_tuple(n, alpha, beta);
  {
    std::lock_guard<std::mutex> lock(g_rule_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double ab = alpha + beta;
  Eigen::VectorXd diag(n), sub(n > 1 ? n - 1 : 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double s = 2.0 * kk + ab;
    if (k == 0)
      diag[0] = (beta - alpha) / (ab + 2.0);
    else
      diag[k] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
  }
  for (std::size_t k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double s = 2.0 * kk + ab;
    double v;
    if (k == 1)
      v = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    else
      v = 4.0 * kk * (kk + alpha) * (kk + beta) * (kk + ab) / (s * s * (s + 1.0) * (s - 1.0));
    sub[k - 1] = std::sqrt(v);
  }
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) + std::lgamma(beta + 1.0) -
                              std::lgamma(ab + 2.0));
  if (n == 1) {
    r.x[0] = diag[0];
    r.w[0] = mu0;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    require(es.info() == Eigen::Success, ErrorKind::numerical, "gauss_jacobi: eigen solver failed");
    for (std::size_t i = 0; i < n; ++i) {
      r.x[i] = es.eigenvalues()[static_cast<Eigen::Index>(i)];
      const double v0 = es.eigenvectors()(0, static_cast<Eigen::Index>(i));
      r.w[i] = mu0 * v0 * v0;
    }
  }
  std::lock_guard<std::mutex> lock(g_rule_mutex);
  cache.emplace(key, r);
  return r;
}

Rule gauss_jacobi_left(std::size_t n, double alpha, double L) {
  Rule r = gauss_jacobi(n, 0.0, alpha);
  const double scale = std::pow(0.5 * L, alpha + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    r.x[i] = 0.5 * L * (1.0 + r.x[i]);
    r.w[i] *= scale;
  }
  return r;
}

Rule graded_rule(double a, double b, std::size_t per_panel, bool grade_left, bool grade_right, int levels,
                 double ratio) {
  std::vector<double> breaks;
  const double mid = 0.5 * (a + b);
  if (grade_left) {
    breaks.push_back(a);
    for (int k = levels; k >= 1; --k) breaks.push_back(a + (mid - a) * std::pow(ratio, k));
  } else {
    breaks.push_back(a);
  }
  breaks.push_back(mid);
  if (grade_right) {
    const double floor_gap = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b));
    for (int k = 1; k <= levels; ++k) {
      const double gap = (b - mid) * std::pow(ratio, k);
      if (gap < floor_gap) break;
      breaks.push_back(b - gap);
    }
  }
  breaks.push_back(b);
  Rule out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i])) continue;
    Rule p = gauss_legendre(per_panel, breaks[i], breaks[i + 1]);
    out.x.insert(out.x.end(), p.x.begin(), p.x.end());
    out.w.insert(out.w.end(), p.w.begin(), p.w.end());
  }
  return out;
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

void gk15(const Function& f, double a, double b, double& result, double& error) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * kWgk[7];
  double rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    rk += kWgk[j] * s;
    if (j % 2 == 1) rg += kWg[j / 2] * s;
  }
  result = rk * h;
  error = std::abs((rk - rg) * h);
}

double adapt(const Function& f, double a, double b, double whole, double err, double tol, double noise,
             int depth) {
  if (err <= std::max(tol, noise) || depth <= 0 || !(b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::abs(a)))
    return whole;
  const double m = 0.5 * (a + b);
  double r1, e1, r2, e2;
  gk15(f, a, m, r1, e1);
  gk15(f, m, b, r2, e2);
  if (e1 + e2 <= std::max(tol, noise)) return r1 + r2;
  return adapt(f, a, m, r1, e1, 0.5 * tol, noise, depth - 1) + adapt(f, m, b, r2, e2, 0.5 * tol, noise, depth - 1);
}

}  // namespace

double integrate_adaptive(const Function& f, double a, double b, double abs_tol, double rel_tol, int max_depth) {
  if (a == b) return 0.0;
  if (b < a) return -integrate_adaptive(f, b, a, abs_tol, rel_tol, max_depth);
  double r, e;
  gk15(f, a, b, r, e);
  const double tol = std::max(abs_tol, rel_tol * std::abs(r));
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(r);
  return adapt(f, a, b, r, e, tol, noise, max_depth);
}

double integrate_singular(const Function& g, double b, double upper) {
  require(b > 0.0, ErrorKind::domain, "integrate_singular: weight exponent b must be > 0");
  require(upper >= 0.0, ErrorKind::domain, "integrate_singular: upper limit must be >= 0");
  const double inv_b = 1.0 / b;
  auto head = [&](double top) {
    const double ub = std::pow(top, b);
    const int pieces = 8;
    double sum = 0.0;
    for (int k = 0; k < pieces; ++k) {
      const double lo = ub * k / pieces, hi = ub * (k + 1) / pieces;
      sum += integrate_adaptive([&](double u) { return g(std::pow(u, inv_b)); }, lo, hi, 1e-15, 1e-13);
    }
    return sum * inv_b;
  };
  if (std::isfinite(upper)) return head(upper);
  const double split = std::max(1.0, b);
  double total = head(split);
  auto tail = [&](double s) {
    if (s >= 1.0) return 0.0;
    const double y = split + s / (1.0 - s);
    const double v = std::pow(y, b - 1.0) * g(y);
    return std::isfinite(v) ? v / ((1.0 - s) * (1.0 - s)) : 0.0;
  };
  for (int k = 0; k < 16; ++k)
    total += integrate_adaptive(tail, k / 16.0, (k + 1) / 16.0, 1e-15, 1e-13);
  return total;
}

double integrate_singular(const SampledField& g, double b, double upper) {
  require(upper <= g.grid.back() && upper >= g.grid.front(), ErrorKind::domain,
          "integrate_singular: upper limit outside the sampled grid");
  require(g.grid.front() == 0.0, ErrorKind::domain, "integrate_singular: grid must start at 0");
  return integrate_singular([&](double y) { return interpolate(g, y); }, b, upper);
}

// ---------------------------------------------------------------- interpolation

double interpolate(const SampledField& field, double x) {
  const auto& nodes = field.grid.nodes();
  const double tol = 1e-14 * std::max(1.0, std::abs(nodes.back()));
  require(x >= nodes.front() - tol && x <= nodes.back() + tol, ErrorKind::domain,
          "interpolate: point outside grid (extrapolation refused)");
  const std::size_t n = nodes.size();
  const std::size_t i = field.grid.cell(x);
  const std::size_t j0 = std::min(i > 0 ? i - 1 : 0, n - 4);
  double sum = 0.0;
  for (std::size_t a = j0; a < j0 + 4; ++a) {
    double l = 1.0;
    for (std::size_t c = j0; c < j0 + 4; ++c)
      if (c != a) l *= (x - nodes[c]) / (nodes[a] - nodes[c]);
    sum += l * field.values[a];
  }
  return sum;
}

std::vector<std::vector<double>> fornberg_weights(double z, std::span<const double> x, int m) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> c(static_cast<std::size_t>(m) + 1, std::vector<double>(n, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const int mn = std::min(static_cast<int>(i), m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

double finite_diff(const SampledField& field, int order, double x) {
  require(order == 1 || order == 2, ErrorKind::domain, "finite_diff: order must be 1 or 2");
  const auto& nodes = field.grid.nodes();
  constexpr std::size_t width = 7;
  require(nodes.size() >= width, ErrorKind::input, "finite_diff: fewer than 7 nodes");
  require(x >= nodes.front() && x <= nodes.back(), ErrorKind::domain, "finite_diff: point outside grid");
  auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
  std::size_t near = static_cast<std::size_t>(it - nodes.begin());
  if (near > 0 && (near == nodes.size() || x - nodes[near - 1] < nodes[near] - x)) --near;
  std::size_t j0 = near >= width / 2 ? near - width / 2 : 0;
  j0 = std::min(j0, nodes.size() - width);
  auto w = fornberg_weights(x, std::span<const double>(nodes.data() + j0, width), order);
  double s = 0.0;
  for (std::size_t k = 0; k < width; ++k) s += w[static_cast<std::size_t>(order)][k] * field.values[j0 + k];
  return s;
}

ChebyshevBasis::ChebyshevBasis(std::size_t n, double a, double b) : a_(a), b_(b) {
  require(n >= 2, ErrorKind::domain, "chebyshev basis: degree must be >= 2");
  nodes_ = chebyshev_lobatto(n, a, b);
  bary_.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) bary_[k] = ((k % 2) ? -1.0 : 1.0) * ((k == 0 || k == n) ? 0.5 : 1.0);
  const std::size_t m = n + 1;
  diff_.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double v = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
      diff_[i * m + j] = v;
      diag -= v;
    }
    diff_[i * m + i] = diag;
  }
}

void ChebyshevBasis::cardinal(double x, std::span<double> out) const {
  const std::size_t m = nodes_.size();
  for (std::size_t k = 0; k < m; ++k) {
    if (x == nodes_[k]) {
      std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
      out[k] = 1.0;
      return;
    }
  }
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    out[k] = bary_[k] / (x - nodes_[k]);
    s += out[k];
  }
  for (std::size_t k = 0; k < m; ++k) out[k] /= s;
}

void ChebyshevBasis::cardinal_with_derivative(double x, std::span<double> value, std::span<double> deriv) const {
  const std::size_t m = nodes_.size();
  for (std::size_t k = 0; k < m; ++k) {
    const double dx = x - nodes_[k];
    if (std::abs(dx) <= 1e-8 * (b_ - a_)) {
      // the barycentric derivative cancels catastrophically here; expand about the node
      for (std::size_t j = 0; j < m; ++j) {
        double d2 = 0.0;
        for (std::size_t l = 0; l < m; ++l) d2 += diff_[k * m + l] * diff_[l * m + j];
        value[j] = (j == k ? 1.0 : 0.0) + dx * diff_[k * m + j];
        deriv[j] = diff_[k * m + j] + dx * d2;
      }
      return;
    }
  }
  double s = 0.0, ds = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double r = 1.0 / (x - nodes_[k]);
    value[k] = bary_[k] * r;
    s += value[k];
    ds -= value[k] * r;
  }
  for (std::size_t k = 0; k < m; ++k) {
    const double r = 1.0 / (x - nodes_[k]);
    deriv[k] = (-value[k] * r * s - value[k] * ds) / (s * s);
    value[k] /= s;
  }
}

double ChebyshevBasis::evaluate(std::span<const double> values, double x) const {
  const std::size_t m = nodes_.size();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    if (x == nodes_[k]) return values[k];
    const double r = bary_[k] / (x - nodes_[k]);
    num += r * values[k];
    den += r;
  }
  return num / den;
}

LocalLagrange::LocalLagrange(std::vector<double> nodes, int degree) : nodes_(std::move(nodes)), degree_(degree) {
  require(degree >= 1 && nodes_.size() > static_cast<std::size_t>(degree), ErrorKind::input,
          "local lagrange: not enough nodes for the degree");
}

std::size_t LocalLagrange::first_node(double x) const {
  const std::size_t n = nodes_.size();
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  std::size_t i = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
  i = std::min(i, n - 2);
  const std::size_t half = static_cast<std::size_t>(degree_) / 2;
  std::size_t s = i >= half ? i - half : 0;
  return std::min(s, n - static_cast<std::size_t>(degree_) - 1);
}

std::size_t LocalLagrange::weights(double x, int k, std::span<double> out) const {
  const std::size_t s = first_node(x);
  const std::size_t p = static_cast<std::size_t>(degree_) + 1;
  if (k == 0) {
    const double* xs = nodes_.data() + s;
    for (std::size_t a = 0; a < p; ++a) {
      double l = 1.0;
      for (std::size_t c = 0; c < p; ++c)
        if (c != a) l *= (x - xs[c]) / (xs[a] - xs[c]);
      out[a] = l;
    }
    return s;
  }
  auto w = fornberg_weights(x, std::span<const double>(nodes_.data() + s, p), k);
  for (std::size_t a = 0; a < p; ++a) out[a] = w[static_cast<std::size_t>(k)][a];
  return s;
}

double LocalLagrange::evaluate(std::span<const double> values, double x) const {
  std::vector<double> w(static_cast<std::size_t>(degree_) + 1);
  const std::size_t s = weights(x, 0, w);
  double sum = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) sum += w[a] * values[s + a];
  return sum;
}

std::vector<double> LocalLagrange::diff_matrix(int order) const {
  const std::size_t n = nodes_.size();
  const std::size_t p = static_cast<std::size_t>(degree_) + 1;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t half = p / 2;
    std::size_t s = i >= half ? i - half : 0;
    s = std::min(s, n - p);
    auto w = fornberg_weights(nodes_[i], std::span<const double>(nodes_.data() + s, p), order);
    for (std::size_t a = 0; a < p; ++a) d[i * n + s + a] = w[static_cast<std::size_t>(order)][a];
  }
  return d;
}

}  // namespace degenheat::numerics
