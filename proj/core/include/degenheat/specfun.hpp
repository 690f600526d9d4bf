#pragma once

namespace degenheat::specfun {

enum class Regime { series, asymptotic };

struct PsiEval {
  double b = 0.0;
  double z = 0.0;
  double value = 0.0;
  Regime regime = Regime::series;
};

/// Gamma function for x > 0.
double gamma(double x);

/// psi_b(z) = sum_j z^j / (j! Gamma(j+b)). b = 0 is accepted and equals z psi_2(z).
PsiEval psi(double b, double z);

/// e^{-2 sqrt z} psi_b(z). Finite for every z, which is what the kernels need.
double psi_scaled(double b, double z);

/// psi_b'(z) = psi_{b+1}(z).
double psi_prime(double b, double z);

/// psi_b''(z) = psi_{b+2}(z).
double psi_second(double b, double z);

/// Argument above which psi switches to the large-argument expansion.
double psi_crossover(double b);

/// Forced-branch evaluations of the scaled function, used to check continuity at the crossover.
double psi_scaled_series(double b, double z);
double psi_scaled_asymptotic(double b, double z);

/// Modified Bessel function I_nu(x), nu > -1, via I_nu(2 sqrt w) = w^{nu/2} psi_{nu+1}(w).
double bessel_i(double nu, double x);

}  // namespace degenheat::specfun
