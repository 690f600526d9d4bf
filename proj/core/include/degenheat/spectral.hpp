#pragma once

#include <string>
#include <vector>

#include "degenheat/numerics.hpp"
#include "degenheat/wf_solver.hpp"

namespace degenheat::spectral {

/// v0(x) = x^{b0-1} (1-x)^{b1-1} e^{B(x)} / Z, where B is the antiderivative of the selection part.
struct StationaryDensity {
  wf::DriftSpec drift;
  double b0 = 1.0, b1 = 1.0;
  double norm = 1.0;  ///< Z

  double operator()(double x) const;
  /// e^{B(x)}, the smooth factor.
  double smooth_part(double x) const;
  numerics::SampledField sample(const numerics::Grid& grid) const;
  /// x(1-x) v0' + ((1-2x) - b) v0 at x, i.e. the zero-flux equation (x(1-x)v0)' - b v0.
  double flux_residual(double x) const;
};

StationaryDensity stationary_density(const wf::DriftSpec& d);

enum class HarmonicKind {
  two_sided,   ///< b0 = b1 = 0: u0(0) = 0, u0(1) = 1
  left_only,   ///< b0 = 0 < b1: u0(0) = 0, u0'(0) = 1, unbounded at 1 when b1 >= 1
  right_only,  ///< b1 = 0 < b0: u0(1) = 1, u0'(1) = 1
};

/// Increasing solution of L u0 = 0.
struct Harmonic {
  wf::DriftSpec drift;
  HarmonicKind kind = HarmonicKind::two_sided;
  double norm = 1.0;
  double operator()(double x) const;
  /// u0'(x) = exp(-int b/(y(1-y))) up to the normalization.
  double derivative(double x) const;
};

/// The two-sided null function; throws unless b0 = b1 = 0.
numerics::SampledField harmonic_u0(const wf::DriftSpec& d, const numerics::Grid& grid);
/// All three cases, flagged by kind; throws when b0 > 0 and b1 > 0.
Harmonic harmonic(const wf::DriftSpec& d);

struct AbsorptionWeights {
  double c0 = 0.0;         ///< mass absorbed at 0
  double c1 = 0.0;         ///< mass absorbed at 1
  double transient = 0.0;  ///< mass of the absolutely continuous part
};

/// Atoms of the forward evolution of the point mass at x.
AbsorptionWeights absorption_weights(const wf::DriftSpec& d, double x, double t, wf::SolverOptions opt = {});
/// Atoms of the forward evolution of the density g.
AbsorptionWeights absorption_weights(const wf::DriftSpec& d, const numerics::Function& g, double t,
                                     std::span<const double> breaks = {}, wf::SolverOptions opt = {});

struct PolynomialSpectrum {
  std::vector<double> lambda;                     ///< lambda_n = -n(n-1+b0+b1)
  std::vector<std::vector<double>> eigenvectors;  ///< monomial coefficients, leading coefficient 1
};

/// Eigenvalues of L on polynomials of degree <= n_max for linear drift.
PolynomialSpectrum polynomial_spectrum(const wf::DriftSpec& d, int n_max);

struct SpectralEstimate {
  double lambda1 = 0.0;
  double t_start = 0.0, t_end = 0.0;
  double residual = 0.0;  ///< rms misfit of the log-linear fit
  std::vector<double> times;
  std::vector<double> distances;  ///< |u(., t) - limit|_inf
};

/// Fits log |Q_t f - Q_inf f| over [t_start, t_end]; the window is moved to start at 3/|lambda|
/// after a first fit. Throws a numerical error if the probe shows no decay.
SpectralEstimate spectral_gap_estimate(const wf::DriftSpec& d, const numerics::Function& f, double t_start,
                                       double t_end, wf::SolverOptions opt = {});

/// lim_{t -> inf} Q_t f at x.
double long_time_limit(const wf::DriftSpec& d, const numerics::Function& f, double x);

struct ResolventResult {
  numerics::SampledField w;
  double residual = 0.0;              ///< sup over interior nodes of |(lambda - L) w - f|
  double horizon = 0.0;               ///< T* of the Laplace integral
  std::vector<double> f_norms, w_norms;  ///< C^m seminorms, m = 0, 1, 2
};

/// (lambda - L)^{-1} f = int_0^inf e^{-lambda t} Q_t f dt for real lambda > 0.
ResolventResult resolvent_apply(const wf::DriftSpec& d, double lambda, const numerics::Function& f,
                                const numerics::Grid& out, wf::SolverOptions opt = {});

}  // namespace degenheat::spectral
