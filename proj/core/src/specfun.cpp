#include "degenheat/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "degenheat/error.hpp"

namespace degenheat::specfun {

namespace {

constexpr int kMaxTermsPerSide = 4000;
constexpr double kRelStop = 1e-17;

void check_args(double b, double z) {
  require(b >= 0.0 && std::isfinite(b), ErrorKind::domain, "psi: order b must be finite and >= 0");
  require(z >= 0.0 && std::isfinite(z), ErrorKind::domain, "psi: argument z must be finite and >= 0");
}

}  // namespace

double gamma(double x) {
  require(x > 0.0, ErrorKind::domain, "gamma: argument must be positive");
  return std::tgamma(x);
}

double psi_crossover(double b) {
  const double nu = b - 1.0;
  return std::max(150.0, nu * nu * nu * nu);
}

double psi_scaled_series(double b, double z) {
  check_args(b, z);
  if (b == 0.0) return z * psi_scaled_series(2.0, z);
  if (z == 0.0) return 1.0 / std::tgamma(b);

  // Terms are positive and unimodal in j; start at the peak and walk outward.
  const double disc = (b + 1.0) * (b + 1.0) - 4.0 * (b - z);
  const double root = 0.5 * (-(b + 1.0) + std::sqrt(std::max(disc, 0.0)));
  const double jpeak = std::max(0.0, std::floor(root));
  const double lz = std::log(z);
  const double log_peak =
      jpeak * lz - std::lgamma(jpeak + 1.0) - std::lgamma(jpeak + b) - 2.0 * std::sqrt(z);
  const double peak = std::exp(log_peak);

  double sum = peak;
  double term = peak;
  for (int k = 0; k < kMaxTermsPerSide; ++k) {
    const double j = jpeak + k;
    term *= z / ((j + 1.0) * (j + b));
    sum += term;
    if (term < kRelStop * sum) break;
  }
  term = peak;
  for (double j = jpeak; j > 0.0; j -= 1.0) {
    term *= j * (j - 1.0 + b) / z;
    sum += term;
    if (term < kRelStop * sum) break;
  }
  return sum;
}

double psi_scaled_asymptotic(double b, double z) {
  check_args(b, z);
  require(z > 0.0, ErrorKind::domain, "psi: asymptotic branch needs z > 0");
  if (b == 0.0) return z * psi_scaled_asymptotic(2.0, z);
  const double nu = b - 1.0;
  const double mu = 4.0 * nu * nu;
  const double w = 2.0 * std::sqrt(z);
  double sum = 1.0;
  double term = 1.0;
  double last = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * w);
    if (std::abs(next) >= std::abs(last) && k > 1) break;
    sum += next;
    term = next;
    last = next;
    if (std::abs(next) < kRelStop * std::abs(sum)) break;
  }
  return std::pow(z, 0.25 - 0.5 * b) / std::sqrt(4.0 * std::numbers::pi) * sum;
}

double psi_scaled(double b, double z) {
  check_args(b, z);
  if (z > psi_crossover(b)) return psi_scaled_asymptotic(b, z);
  return psi_scaled_series(b, z);
}

PsiEval psi(double b, double z) {
  check_args(b, z);
  PsiEval out;
  out.b = b;
  out.z = z;
  out.regime = z > psi_crossover(b) ? Regime::asymptotic : Regime::series;
  out.value = psi_scaled(b, z) * std::exp(2.0 * std::sqrt(z));
  return out;
}

double psi_prime(double b, double z) { return psi(b + 1.0, z).value; }

double psi_second(double b, double z) { return psi(b + 2.0, z).value; }

double bessel_i(double nu, double x) {
  require(nu > -1.0, ErrorKind::domain, "bessel_i: order must exceed -1");
  require(x >= 0.0 && std::isfinite(x), ErrorKind::domain, "bessel_i: argument must be >= 0");
  const double w = 0.25 * x * x;
  if (w == 0.0) {
    if (nu == 0.0) return 1.0;
    return nu > 0.0 ? 0.0 : INFINITY;
  }
  const double s = psi_scaled(nu + 1.0, w);
  return std::exp(0.5 * nu * std::log(w) + x) * s;
}

}  // namespace degenheat::specfun
