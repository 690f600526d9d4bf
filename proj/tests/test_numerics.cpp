#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "degenheat/error.hpp"
#include "degenheat/numerics.hpp"

using namespace degenheat;
using namespace degenheat::numerics;

TEST(Grid, Invariants) {
  EXPECT_THROW(Grid({0, 0.1, 0.2}, Domain::unit()), Error);
  EXPECT_THROW(Grid({0, 0.1, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, Domain::unit()), Error);
  EXPECT_THROW(Grid({-0.1, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}, Domain::unit()), Error);
  auto g = graded_unit_grid(1e-4, 0.02);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i] + g[g.size() - 1 - i], 1.0, 1e-12);
  for (std::size_t i = 2; i < g.size() / 2; ++i) EXPECT_LE((g[i] - g[i - 1]) / (g[i - 1] - g[i - 2]), 1.15 + 1e-9);
}

TEST(Quadrature, GaussLegendreExactness) {
  auto r = gauss_legendre(10, 0.0, 2.0);
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * std::pow(r.x[i], 19);
  EXPECT_NEAR(s, std::pow(2.0, 20) / 20.0, 1e-9);
}

TEST(Quadrature, GaussJacobiMoments) {
  // int_0^L z^a z^k dz = L^{a+k+1}/(a+k+1)
  for (double a : {-0.9, -0.5, 0.0, 0.7, 2.3}) {
    auto r = gauss_jacobi_left(12, a, 1.7);
    for (int k = 0; k < 20; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * std::pow(r.x[i], k);
      const double ref = std::pow(1.7, a + k + 1) / (a + k + 1);
      EXPECT_NEAR(s, ref, 1e-13 * ref) << a << " " << k;
    }
  }
}

TEST(Quadrature, IntegrateSingularExamples) {
  EXPECT_NEAR(integrate_singular([](double y) { return std::exp(-y); }, 2.0, INFINITY), 1.0, 1e-9);
  EXPECT_NEAR(integrate_singular([](double) { return 1.0; }, 0.5, 1.0), 2.0, 1e-9 * 3);
  EXPECT_NEAR(integrate_singular([](double y) { return std::exp(-y); }, 1.5, INFINITY), std::sqrt(std::numbers::pi) / 2,
              1e-9);
  EXPECT_THROW(integrate_singular([](double) { return 1.0; }, 0.0, 1.0), Error);
}

TEST(Quadrature, IntegrateSingularLinearAndPositive) {
  auto f = [](double y) { return std::cos(3 * y) + 2; };
  auto g = [](double y) { return y * y; };
  const double a = integrate_singular(f, 0.3, 2.0), b = integrate_singular(g, 0.3, 2.0);
  const double ab = integrate_singular([&](double y) { return 2 * f(y) - 5 * g(y); }, 0.3, 2.0);
  EXPECT_NEAR(ab, 2 * a - 5 * b, 1e-10 * (std::abs(ab) + 1));
  EXPECT_GT(a, 0.0);
  EXPECT_GT(b, 0.0);
}

TEST(Quadrature, SampledSingularIntegral) {
  auto grid = uniform_grid(0.0, 1.0, 201, Domain::unit());
  auto f = SampledField::sample(grid, [](double y) { return 1 + y; });
  // int_0^1 y^{-1/2}(1+y) = 2 + 2/3
  EXPECT_NEAR(integrate_singular(f, 0.5, 1.0), 8.0 / 3.0, 1e-9);
}

TEST(Quadrature, GradedRuleConvergenceOrder) {
  // composite rule on smooth g: refine panels, error falls at least like h^4
  auto g = [](double y) { return std::exp(std::sin(3 * y)); };
  const double ref = integrate_adaptive(g, 0, 2, 1e-15, 1e-15);
  double prev = 0;
  for (int n : {4, 8, 16}) {
    double s = 0;
    for (int p = 0; p < n; ++p) {
      auto r = gauss_legendre(2, 2.0 * p / n, 2.0 * (p + 1) / n);
      for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * g(r.x[i]);
    }
    const double err = std::abs(s - ref);
    if (prev > 0) EXPECT_GT(prev / err, 12.0);
    prev = err;
  }
}

TEST(Quadrature, GradedRuleHandlesEndpointSingularity) {
  auto r = graded_rule(0, 1, 16, true, true);
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * std::pow(r.x[i], -0.6) * std::pow(1 - r.x[i], -0.3);
  EXPECT_NEAR(s, std::tgamma(0.4) * std::tgamma(0.7) / std::tgamma(1.1), 1e-10);
}

TEST(Interpolate, Examples) {
  auto g = uniform_grid(0, 1, 10, Domain::unit());
  auto lin = SampledField::sample(g, [](double x) { return 3 * x - 1; });
  EXPECT_NEAR(interpolate(lin, 0.4321), 3 * 0.4321 - 1, 1e-14);
  std::vector<double> cheb;
  for (int k = 7; k >= 0; --k) cheb.push_back(0.5 - 0.5 * std::cos(std::numbers::pi * (7 - k) / 7.0));
  auto cub = SampledField::sample(Grid(cheb, Domain::unit()), [](double x) { return x * x * x; });
  EXPECT_NEAR(interpolate(cub, 0.37), 0.050653, 1e-12);
  auto g64 = uniform_grid(0, 1, 64, Domain::unit());
  auto s = SampledField::sample(g64, [](double x) { return std::sin(x); });
  EXPECT_NEAR(interpolate(s, 0.5), 0.4794255386, 1e-8);
  EXPECT_THROW(interpolate(s, 1.01), Error);
}

TEST(FiniteDiff, Examples) {
  auto g = uniform_grid(0, 1, 41, Domain::unit());
  auto sq = SampledField::sample(g, [](double x) { return x * x; });
  for (double x : {0.0, 0.13, 0.5, 0.97}) EXPECT_NEAR(finite_diff(sq, 2, x), 2.0, 1e-8);
  auto lin = SampledField::sample(g, [](double x) { return x; });
  EXPECT_NEAR(finite_diff(lin, 1, 0.3), 1.0, 1e-12);
  auto s = SampledField::sample(g, [](double x) { return std::sin(x); });
  EXPECT_NEAR(finite_diff(s, 1, 0.3), std::cos(0.3), 1e-7);
  // order >= 4: halving h reduces the error by more than 2^4
  auto err = [](int n) {
    auto gg = uniform_grid(0, 1, static_cast<std::size_t>(n), Domain::unit());
    auto f = SampledField::sample(gg, [](double x) { return std::exp(2 * x); });
    return std::abs(finite_diff(f, 1, 0.5) - 2 * std::exp(1.0));
  };
  EXPECT_GT(err(11) / err(21), 16.0);
  auto small = SampledField(uniform_grid(0, 1, 8, Domain::unit()), std::vector<double>(8, 1.0));
  EXPECT_THROW(finite_diff(small, 3, 0.5), Error);
}

TEST(Chebyshev, InterpolationAndDerivative) {
  ChebyshevBasis cb(24, 0, 1);
  std::vector<double> v(cb.size());
  for (std::size_t i = 0; i < cb.size(); ++i) v[i] = std::exp(cb.nodes()[i]);
  EXPECT_NEAR(cb.evaluate(v, 0.321), std::exp(0.321), 1e-14);
  std::vector<double> l(cb.size()), d(cb.size());
  cb.cardinal_with_derivative(0.321, l, d);
  double dv = 0;
  for (std::size_t i = 0; i < cb.size(); ++i) dv += d[i] * v[i];
  EXPECT_NEAR(dv, std::exp(0.321), 1e-11);
}

TEST(LocalLagrange, ReproducesPolynomials) {
  auto g = graded_half_line_grid(2.0, 1e-3, 0.05);
  LocalLagrange L(g.nodes(), 7);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = std::pow(g[i], 7) - g[i];
  for (double x : {0.0, 1e-4, 0.3, 1.99}) EXPECT_NEAR(L.evaluate(v, x), std::pow(x, 7) - x, 1e-10);
  auto D = L.diff_matrix(1);
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; i += 7) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += D[i * n + j] * v[j];
    EXPECT_NEAR(s, 7 * std::pow(g[i], 6) - 1, 1e-7);
  }
}
