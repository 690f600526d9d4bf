#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace degenheat::numerics {

enum class DomainKind { unit_interval, half_line };

struct Domain {
  DomainKind kind = DomainKind::unit_interval;
  double truncation = 1.0;  ///< right end of the computational window on the half line

  static Domain unit() { return {DomainKind::unit_interval, 1.0}; }
  static Domain half_line(double truncation) { return {DomainKind::half_line, truncation}; }
};

class Grid {
 public:
  Grid(std::vector<double> nodes, Domain domain);

  const std::vector<double>& nodes() const { return nodes_; }
  const Domain& domain() const { return domain_; }
  std::size_t size() const { return nodes_.size(); }
  double operator[](std::size_t i) const { return nodes_[i]; }
  double front() const { return nodes_.front(); }
  double back() const { return nodes_.back(); }

  /// Index i with nodes[i] <= x < nodes[i+1], clamped to the last cell.
  std::size_t cell(double x) const;

 private:
  std::vector<double> nodes_;
  Domain domain_;
};

struct SampledField {
  SampledField(Grid grid, std::vector<double> values, int smoothness = 0);

  static SampledField sample(const Grid& grid, const std::function<double(double)>& f,
                             int smoothness = 0);

  Grid grid;
  std::vector<double> values;
  int smoothness = 0;  ///< asserted class C^m

  double sup_norm() const;
};

using Function = std::function<double(double)>;

// ---------------------------------------------------------------- grids

Grid uniform_grid(double a, double b, std::size_t n, Domain domain);

/// Nodes on [0,1] whose spacing grows geometrically away from both endpoints
/// with the given ratio, capped at h_max.
Grid graded_unit_grid(double h_min, double h_max, double ratio = 1.15);

/// Nodes on [0, right] clustered geometrically toward 0.
Grid graded_half_line_grid(double right, double h_min, double h_max, double ratio = 1.15);

/// Chebyshev-Lobatto points on [a,b] in increasing order, n+1 of them.
std::vector<double> chebyshev_lobatto(std::size_t n, double a = 0.0, double b = 1.0);

// ---------------------------------------------------------------- quadrature

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

/// n-point Gauss-Legendre rule on [a,b]. Cached internally; thread safe.
Rule gauss_legendre(std::size_t n, double a = -1.0, double b = 1.0);

/// n-point Gauss-Jacobi rule for the weight (1-x)^alpha (1+x)^beta on [-1,1],
/// computed by Golub-Welsch.
Rule gauss_jacobi(std::size_t n, double alpha, double beta);

/// Rule for the integral over [0,L] of z^alpha F(z) dz (weight folded into w).
Rule gauss_jacobi_left(std::size_t n, double alpha, double L);

/// Composite Gauss-Legendre rule on [a,b] with geometric panel grading toward the
/// requested ends. Handles integrable endpoint singularities of algebraic type.
Rule graded_rule(double a, double b, std::size_t per_panel, bool grade_left, bool grade_right,
                 int levels = 40, double ratio = 0.2);

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
double integrate_adaptive(const Function& f, double a, double b, double abs_tol = 1e-13,
                          double rel_tol = 1e-12, int max_depth = 60);

/// Integral over [0, upper] (upper may be +infinity) of y^{b-1} g(y) dy, by the
/// substitution y = u^{1/b} plus adaptive panels. Requires b > 0.
double integrate_singular(const Function& g, double b, double upper);

/// Same with g given by samples (piecewise-cubic interpolation); upper must lie in the grid.
double integrate_singular(const SampledField& g, double b, double upper);

// ---------------------------------------------------------------- interpolation

/// Piecewise-cubic Lagrange interpolation (four nearest nodes). Throws outside the grid.
double interpolate(const SampledField& field, double x);

/// Weights of the degree-(n-1) Lagrange interpolant and its derivatives at x through
/// the given nodes (Fornberg). Result[k][i] is the weight of node i for derivative k.
std::vector<std::vector<double>> fornberg_weights(double x, std::span<const double> nodes,
                                                  int max_derivative);

/// Derivative of the given order (1 or 2) estimated from a 7-node stencil around x.
double finite_diff(const SampledField& field, int order, double x);

/// Barycentric interpolation on Chebyshev-Lobatto points.
class ChebyshevBasis {
 public:
  ChebyshevBasis(std::size_t n, double a = 0.0, double b = 1.0);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  double a() const { return a_; }
  double b() const { return b_; }

  /// Values of all cardinal functions at x.
  void cardinal(double x, std::span<double> out) const;
  /// Values and first derivatives of all cardinal functions at x.
  void cardinal_with_derivative(double x, std::span<double> value, std::span<double> deriv) const;
  double evaluate(std::span<const double> values, double x) const;

  /// Spectral differentiation matrix, row-major n x n.
  const std::vector<double>& diff_matrix() const { return diff_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> bary_;
  std::vector<double> diff_;
  double a_, b_;
};

/// Local Lagrange interpolation of fixed degree on an arbitrary increasing grid.
/// Each evaluation point uses the degree+1 nodes nearest to its cell.
class LocalLagrange {
 public:
  LocalLagrange(std::vector<double> nodes, int degree);

  const std::vector<double>& nodes() const { return nodes_; }
  int degree() const { return degree_; }
  std::size_t first_node(double x) const;
  /// Writes degree+1 weights for derivative order k and returns the first node index.
  std::size_t weights(double x, int k, std::span<double> out) const;
  double evaluate(std::span<const double> values, double x) const;
  /// Dense row-major differentiation matrix evaluated at the nodes themselves.
  std::vector<double> diff_matrix(int order) const;

 private:
  std::vector<double> nodes_;
  int degree_;
};

}  // namespace degenheat::numerics
