#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "degenheat/numerics.hpp"

namespace degenheat::model {

/// Parameters of the half-line kernel k_t^b for L_b = x d^2 + b d.
struct ModelKernel {
  ModelKernel(double b, double t);
  double b;
  double t;
};

/// k_t^b(x,y) for b > 0, as a density in y. Evaluated through the psi form.
double k_model(const ModelKernel& kernel, double x, double y);

/// Dirichlet kernel k_t^{0,D}(x,y) = (x/t^2) e^{-(x+y)/t} psi_2(xy/t^2).
double k_dirichlet0(double t, double x, double y);

/// Absolutely continuous part of k_t^b: k_model for b > 0, k_dirichlet0 for b = 0.
double k_density(double b, double t, double x, double y);

/// Weight of the atom at y = 0: e^{-x/t} when b = 0, else 0.
double k_atom(double b, double t, double x);

/// Quadrature that folds the kernel in: for smooth F,
///   atom * F(0) + sum_q w[q] F(y[q])  ~  int_0^infty k_t^b(x,y) F(y) dy.
struct KernelRule {
  std::vector<double> y;
  std::vector<double> w;
  double atom = 0.0;
};

struct KernelRuleOptions {
  double upper = std::numeric_limits<double>::infinity();           ///< integrand assumed zero beyond this point
  std::span<const double> breaks{};   ///< points where the integrand may be nonsmooth
  int points_per_panel = 14;
  double panel_width = 1.0;           ///< panel size in sqrt(y), in units of sqrt(t)
  double max_panel = std::numeric_limits<double>::infinity();  ///< absolute cap on the panel size in sqrt(y)
};

KernelRule kernel_rule(double b, double t, double x, const KernelRuleOptions& opt = {});

/// Half-window [y_lo, y_hi] outside which the kernel mass is below 1e-14.
std::pair<double, double> kernel_window(double b, double t, double x);

/// Solution of the model Cauchy problem sampled on the admissible nodes.
struct HalfLineSolution {
  numerics::SampledField field;
  /// Per-node weight e^{-x/t} multiplying f(0) (b = 0 only; zeros otherwise).
  std::vector<double> atom_at_zero;
};

/// Integral of k_t^b(x,.) against sampled data. Output nodes are those whose kernel
/// window fits in the data grid, or all nodes when the data vanishes on its last
/// eight nodes (compactly supported data).
HalfLineSolution apply_kernel(const ModelKernel& kernel, const numerics::SampledField& f);

/// Same for closed-form data evaluated on the given output grid.
HalfLineSolution apply_kernel(const ModelKernel& kernel, const numerics::Function& f, const numerics::Grid& out);

/// Polynomial in the monomial basis.
struct Poly {
  std::vector<double> c;
  double operator()(double x) const;
  Poly derivative() const;
  std::size_t degree() const { return c.empty() ? 0 : c.size() - 1; }
};

/// e^{t L_b} p, exact finite sum.
Poly exp_poly(double b, double t, const Poly& p);

/// Apply L_b = x d^2 + b d to a polynomial.
Poly apply_model_operator(double b, const Poly& p);

/// Returns int k_t^{b+j}(x,y) d^j f(y) dy on the admissible nodes of f.
/// Derivatives of sampled data come from local degree-7 Lagrange stencils.
numerics::SampledField derivative_transfer(const ModelKernel& kernel, const numerics::SampledField& f, int j);

/// Closed-form variant; dj_f must be the j-th derivative of the data.
numerics::SampledField derivative_transfer(const ModelKernel& kernel, const numerics::Function& dj_f, int j,
                                           const numerics::Grid& out);

/// Space-time data g(y,s).
using SpaceTimeFunction = std::function<double(double, double)>;

/// Duhamel operator K_t^b g(x) = int_0^t int k_{t-s}^b(x,y) g(y,s) dy ds on the output grid.
/// T is the end of the time window on which g is defined.
numerics::SampledField duhamel(double b, const SpaceTimeFunction& g, double T, double t, const numerics::Grid& out);

struct GradBound {
  double measured_sup = 0.0;  ///< sup over the (z,s) grid of |d_z u| (s + sqrt(zs)) / |f|_inf
  double fitted_C_b = 0.0;    ///< sup over lambda = z/s of (1+sqrt(lambda)) int |d_z k_1^b(lambda,y)| dy
};

/// Measures the gradient bound |d_z u(z,s)| <= C_b |f|/(s + sqrt(zs)) over z in [0, z_max],
/// s in [1e-4 t, t]. Data is taken as zero beyond f_upper; f_breaks marks its jumps.
GradBound grad_bound_check(double b, double t, const numerics::Function& f, double z_max, int resolution = 80,
                           double f_upper = std::numeric_limits<double>::infinity(),
                           std::span<const double> f_breaks = {});

/// The sharp constant C_b of the gradient bound, computed from the kernel alone.
double gradient_constant(double b);

}  // namespace degenheat::model
