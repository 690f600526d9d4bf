#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "degenheat/numerics.hpp"
#include "degenheat/perturbation.hpp"

namespace degenheat::wf {

/// Drift b(x) on [0,1] of L = x(1-x) d^2 + b(x) d, with b(0) = b0 >= 0 and b(1) = -b1 <= 0.
class DriftSpec {
 public:
  /// b(x) = sum c[k] x^k.
  static DriftSpec polynomial(std::vector<double> coeffs);
  /// b(x) = mu12 (1-x) - mu21 x + s x (1-x).
  static DriftSpec genetics(double mu12, double mu21, double s = 0.0);
  /// b(x) = b0 (1-x) - b1 x.
  static DriftSpec mutation(double b0, double b1) { return genetics(b0, b1, 0.0); }
  /// Arbitrary smooth drift. The key identifies it in solver caches; when empty it is
  /// derived from samples.
  static DriftSpec general(std::function<double(double)> b, std::string key = "");

  double operator()(double x) const;
  double b0() const { return b0_; }
  double b1() const { return b1_; }
  bool is_polynomial() const { return !coeffs_.empty(); }
  const std::vector<double>& coefficients() const { return coeffs_; }
  /// Polynomial degree, or -1 for a general drift.
  int degree() const;
  bool is_linear() const { return is_polynomial() && degree() <= 1; }
  const std::string& key() const { return key_; }

  /// (b(x) - b0) / x, continuous at 0.
  double slope_from_left(double x) const;
  /// The drift seen from the right end: y -> 1 - y turns b into -b(1 - y).
  DriftSpec reflected() const;
  /// b~ in b(x) = b0 (1-x) - b1 x + x(1-x) b~(x).
  double selection_part(double x) const;
  /// Antiderivative of the selection part from 0.
  double selection_integral(double x) const;

 private:
  std::function<double(double)> fn_;
  std::vector<double> coeffs_;
  double b0_ = 0.0, b1_ = 0.0;
  std::string key_;
  void validate();
};

/// a d^2 + b d on [A,B] with a = (x-A)(B-x) a~, a~ > 0.
struct GeneralCoefficients {
  numerics::Function a;
  numerics::Function b;
  double A = 0.0;
  double B = 1.0;
};

struct NormalForm {
  DriftSpec drift;          ///< b~ of x(1-x) d^2 + b~ d in the variable xi
  double time_scale = 1.0;  ///< t in the original problem equals time_scale * t in the normal form
  numerics::Function xi;    ///< original x in [A,B] to xi in [0,1]
  numerics::Function inverse;
};

/// Rescales so the integral of ds/sqrt(a) over [0,1] is pi and maps by xi = sin^2(eta/2).
NormalForm reduce_to_normal_form(const GeneralCoefficients& gc);

/// Polynomial step 35u^4 - 84u^5 + 70u^6 - 20u^7, clamped to [0,1].
double smoothstep(double u);
double smoothstep_derivative(double u);

/// Pasting cutoffs. phi_l = 1 on [0, left_one], 0 beyond left_zero; phi_r mirrors it;
/// phi_0 = 1 on [0, mid_one], 0 beyond mid_zero.
struct Cutoffs {
  double left_one = 11.0 / 16.0, left_zero = 0.75;
  double right_one = 5.0 / 16.0, right_zero = 0.25;
  double mid_one = 3.0 / 8.0, mid_zero = 5.0 / 8.0;
  double eta = (M_PI / 2) * (M_PI / 2) / 8.0;  ///< chart perturbation cutoff width

  double phi_l(double y) const;
  double dphi_l(double y) const;
  double phi_r(double y) const;
  double dphi_r(double y) const;
  double phi_0(double y) const;
};

enum class ChartEnd { left, right };

/// One endpoint in the coordinate x = arcsin^2 sqrt(y) (left) or arcsin^2 sqrt(1-y) (right),
/// where L pulls back to x d^2 + (b_index + x c(x)) d.
struct LocalChart {
  ChartEnd end = ChartEnd::left;
  double b_index = 0.0;
  numerics::Function c;              ///< pullback remainder, (B(x) - b_index)/x
  perturbation::PerturbationField h; ///< c times the chart cutoff
  double eta = 0.0;

  /// Chart coordinate of the global point y.
  double to_chart(double y) const;
  /// Global point of the chart coordinate x.
  double from_chart(double x) const;
  /// |dx/dy| = arcsin(sqrt y)/sqrt(y(1-y)) (with 1-y on the right).
  double jacobian(double y) const;
  /// Pullback drift b_index + x c(x).
  double pullback_drift(double x) const { return b_index + x * c(x); }
};

LocalChart local_chart(const DriftSpec& d, ChartEnd end, const Cutoffs& cut = {});

struct SolverOptions {
  int degree = 48;            ///< Chebyshev degree of the global state
  double tau_max = 1.5e-4;    ///< largest step; steps are t / 2^m
  int N = -1;                 ///< Neumann terms per step; -1 picks it from tol
  double tol = 1e-6;
  double chart_refine = 3.0;  ///< chart nodes per Chebyshev node spacing
  Cutoffs cutoffs{};
  perturbation::NeumannOptions neumann{8, 10, 7, 2.5, 14, 0.05};
};

/// Single pasted parametrix step on the Chebyshev state: P(i,j) is the step applied to the
/// j-th cardinal function, evaluated at node i.
class StepOperator {
 public:
  static std::shared_ptr<const StepOperator> get(const DriftSpec& d, double tau, int N, const SolverOptions& opt);

  StepOperator(const DriftSpec& d, double tau, int N, const SolverOptions& opt);
  const Eigen::MatrixXd& matrix() const { return P_; }
  const numerics::ChebyshevBasis& basis() const { return basis_; }
  double tau() const { return tau_; }
  int N() const { return N_; }

 private:
  numerics::ChebyshevBasis basis_;
  double tau_;
  int N_;
  Eigen::MatrixXd P_;
};

/// The evolution Q_t on the Chebyshev state, composed from 2^m parametrix steps.
class Propagator {
 public:
  Propagator(const DriftSpec& d, double t, const SolverOptions& opt = {});
  const Eigen::MatrixXd& matrix() const { return Q_; }
  const numerics::ChebyshevBasis& basis() const { return step_->basis(); }
  double tau() const { return step_->tau(); }
  int steps() const { return steps_; }
  int N() const { return step_->N(); }
  const StepOperator& step() const { return *step_; }

 private:
  std::shared_ptr<const StepOperator> step_;
  int steps_ = 0;
  Eigen::MatrixXd Q_;
};

/// Number of Neumann terms the solver uses for step tau when the total budget tol is spread
/// over steps of size tau up to time t.
int solver_terms(const DriftSpec& d, double tau, double t, double tol, const SolverOptions& opt = {});

/// Step size used for time t: t / 2^m with m the smallest making it <= tau_max.
double step_size(double t, double tau_max);

/// Backward solution u(., t) with u(., 0) = f, sampled on the grid of f.
numerics::SampledField solve_backward(const DriftSpec& d, const numerics::SampledField& f, double t,
                                      double tol = 1e-6, SolverOptions opt = {});

/// Closed-form data; returns values at the Chebyshev nodes of the state.
std::vector<double> solve_backward_nodes(const DriftSpec& d, const numerics::Function& f, double t,
                                         double tol = 1e-6, SolverOptions opt = {});

/// Closed-form data sampled on the given grid.
numerics::SampledField solve_backward(const DriftSpec& d, const numerics::Function& f, double t,
                                      const numerics::Grid& out, double tol = 1e-6, SolverOptions opt = {});

/// Forward state: absolutely continuous density plus atoms at the ends.
struct SolutionMeasure {
  numerics::SampledField density;
  double atom0 = 0.0;
  double atom1 = 0.0;
  double alpha0 = 0.0, alpha1 = 0.0;  ///< density = y^alpha0 (1-y)^alpha1 p(y)
  std::vector<double> p_nodes;        ///< p on Chebyshev-Lobatto nodes
  std::vector<double> weights;        ///< moments against the cardinal functions of the state

  double mass() const;
  /// Evaluates y^alpha0 (1-y)^alpha1 p(y).
  double density_at(double y) const;
  /// Integral of f against density plus atoms, exact for polynomial f of the state degree.
  double pair(const numerics::Function& f) const;
};

/// Reconstructs a measure from its moments against the cardinal functions.
SolutionMeasure measure_from_moments(const DriftSpec& d, const numerics::ChebyshevBasis& basis,
                                     std::span<const double> moments, std::size_t samples = 201);

/// Forward evolution of a density given by samples.
SolutionMeasure solve_forward(const DriftSpec& d, const numerics::SampledField& g, double t, SolverOptions opt = {});
/// Forward evolution of a density given in closed form; breaks marks points of nonsmoothness.
SolutionMeasure solve_forward(const DriftSpec& d, const numerics::Function& g, double t,
                              std::span<const double> breaks = {}, SolverOptions opt = {});
/// Forward evolution of the unit point mass at x0.
SolutionMeasure solve_forward_point(const DriftSpec& d, double x0, double t, SolverOptions opt = {});

/// q_{t,N}(x,y) of the pasted N-term parametrix.
double parametrix_kernel(const DriftSpec& d, double t, double x, double y, int N, const Cutoffs& cut = {});

/// Heat kernel values q(x_i, y_j) at the state resolution: row i is the forward density from x_i.
Eigen::MatrixXd wf_kernel(const DriftSpec& d, double t, std::span<const double> x, std::span<const double> y,
                          SolverOptions opt = {});

struct DerivativeCheck {
  int j = 0;
  double residual = 0.0;  ///< sup over interior nodes of the differentiated equation
  double scale = 0.0;     ///< sup of |d_t d^j u| for reference
};

/// Measures d_t v - L_[j] v - (lower-order terms) with v = d^j u, L_[j] = x(1-x)d^2 + (b + j(1-2x))d.
DerivativeCheck backward_derivative_check(const DriftSpec& d, const numerics::Function& f, double t, int j,
                                          double tol = 1e-6, SolverOptions opt = {});

}  // namespace degenheat::wf
