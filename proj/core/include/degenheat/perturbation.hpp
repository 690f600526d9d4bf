#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "degenheat/model_kernel.hpp"
#include "degenheat/numerics.hpp"

namespace degenheat::perturbation {

/// Coefficient h of the perturbation z h(z) d_z, supported in [0, support].
struct PerturbationField {
  numerics::Function h;
  double support = 0.0;
  double sup_norm = 0.0;

  static PerturbationField make(numerics::Function h, double support);
  static PerturbationField zero();
  double operator()(double z) const { return z < support ? h(z) : 0.0; }
};

/// Values on grid x time nodes; values[k * grid.size() + m] is the value at (grid[m], times[k]).
struct SpaceTimeField {
  numerics::Grid grid;
  std::vector<double> times;
  std::vector<double> values;

  SpaceTimeField(numerics::Grid grid, std::vector<double> times, std::vector<double> values);
  static SpaceTimeField sample(const numerics::Grid& grid, std::vector<double> times,
                               const model::SpaceTimeFunction& g);
  double T() const { return times.back(); }
  double at(std::size_t k, std::size_t m) const { return values[k * grid.size() + m]; }
  numerics::SampledField slice(std::size_t k) const;
};

/// Times s = r^2 with r on Chebyshev-Lobatto points of [0, sqrt(T)], increasing, starting at 0.
std::vector<double> sqrt_time_nodes(double T, int count);

struct NeumannOptions {
  int time_nodes = 8;
  int sigma_points = 32;     ///< Gauss points in v for s' = s v^2
  int interp_degree = 7;     ///< local Lagrange degree in space
  double panel_width = 2.5;  ///< kernel-rule panel width in units of sqrt(t)
  int points_per_panel = 14;
  double max_panel = 0.05;   ///< absolute cap on the panel size in sqrt(z)
};

/// Discretization of A_t^b g(x) = int_0^t int k_{t-s}^b(x,z) h(z) z d_z g(z,s) dz ds acting on the
/// gradient d_z g sampled on grid x time nodes.
class NeumannOperator {
 public:
  NeumannOperator(double b, PerturbationField h, numerics::Grid grid, std::vector<double> times,
                  NeumannOptions opt = {});

  double b() const { return b_; }
  const numerics::Grid& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  const PerturbationField& field() const { return h_; }
  std::size_t size() const { return grid_.size() * times_.size(); }

  /// Rows mapping the gradient field (length size()) to A g at the points x and time s.
  Eigen::MatrixXd rows(std::span<const double> x, double s) const;

  /// Dense operator from the gradient field to A g on the full grid x time nodes (built lazily).
  const Eigen::MatrixXd& matrix() const;

  /// Spatial derivative of each time slice (columns are independent data sets).
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& G) const;

  /// Values at points x of the slice at time node k.
  Eigen::MatrixXd interpolate(const Eigen::MatrixXd& G, std::span<const double> x, std::size_t k) const;

  /// A g from gradient data, over the full grid x time nodes.
  Eigen::MatrixXd apply_gradient(const Eigen::MatrixXd& dG) const { return matrix() * dG; }

 private:
  double b_;
  PerturbationField h_;
  numerics::Grid grid_;
  std::vector<double> times_;
  NeumannOptions opt_;
  numerics::LocalLagrange space_;
  Eigen::MatrixXd dx_;
  mutable Eigen::MatrixXd full_;
  mutable bool built_ = false;
};

/// A_t^b g on the grid of g, with d_z g from local differentiation of each time slice.
numerics::SampledField apply_A(double b, const PerturbationField& h, const SpaceTimeField& g, double t);

struct NeumannSeries {
  std::vector<numerics::SampledField> iterates;  ///< (A_t^b)^j g~ at time t, j = 0..N
  std::vector<double> iterate_norms;
  double M = 0.0;        ///< measured sup sqrt(zs)|d_z g~|
  double C_b = 0.0;
  numerics::SampledField sum() const;
};

/// Iterates of the Neumann series for data f (taken as zero beyond its grid). Aborts when an
/// iterate exceeds its predicted bound by more than a factor of 10.
NeumannSeries neumann_series(double b, const PerturbationField& h, const numerics::SampledField& f, double t,
                             int N, NeumannOptions opt = {});

/// Partial sum through j = N.
numerics::SampledField neumann_solve(double b, const PerturbationField& h, const numerics::SampledField& f,
                                     double t, int N, NeumannOptions opt = {});

/// Iterates j = 1..N at time t and points x for data whose evolved gradient dg(z, s) is known in
/// closed form and concentrates near y0 for small s (point masses, jumps). The first iterate is
/// integrated directly with a rule adapted to the product of the two kernels; later ones use the
/// operator on the given grid (an empty grid selects one from t). Returns x.size() x N.
Eigen::MatrixXd neumann_iterates_concentrated(double b, const PerturbationField& h,
                                              const model::SpaceTimeFunction& dg, double y0, double t, int N,
                                              std::span<const double> x, std::vector<double> grid = {},
                                              NeumannOptions opt = {});

/// First iterate A_s g(x) for the same kind of data.
double apply_A_concentrated(double b, const PerturbationField& h, const model::SpaceTimeFunction& dg, double y0,
                            double s, double x, int sigma_points = 32);

/// d_j = pi^{(j+1)/2} / Gamma((j+1)/2).
double d_const(int j);
/// D_0 = 1, D_j = 2 D_{j-1} Gamma(j/2) / Gamma((j+1)/2).
double D_const(int j);

struct BoundConstants {
  double M = 1.0;
  double C_b = 1.0;
  double L = 1.0;
  std::vector<double> h_norms{1.0};  ///< |h|_{C^0}, |h|_{C^1}, ...
  double g_norm = 0.0;               ///< |g|_{C^l} on [0,T], used when l >= 1
};

/// Right side of the iterate bound: for l = 0,
///   (2 d_{j-1}/j) M C_b^{j-1} (sqrt(L)|h|)^j t^{j/2};
/// for l >= 1, (2 D_{j-1}/j)(M + |g|_{C^l}) (C_b |h|_{C^l})^j t^{j/2}.
double truncation_bound(int j, const BoundConstants& c, double t, int ell = 0);

/// Smallest N whose tail sum of bounds beyond N is below tol. Throws if N > 25 would be needed.
int choose_N(double t, double tol, const BoundConstants& c, int ell = 0);

}  // namespace degenheat::perturbation
