#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "degenheat/error.hpp"
#include "degenheat/perturbation.hpp"

using namespace degenheat;
using namespace degenheat::perturbation;
using numerics::Domain;

namespace {

double bump(double z) {
  if (z <= 0 || z >= 1) return 0.0;
  const double u = 2 * z - 1;
  return std::exp(1 - 1 / (1 - u * u));
}

// Nested adaptive quadrature of A_t g for g(z,s) = z, so d_z g = 1.
double apply_A_brute(double b, double t, double x) {
  return numerics::integrate_adaptive(
      [&](double s) {
        return numerics::integrate_adaptive(
            [&](double z) { return model::k_density(b, t - s, x, z) * bump(z) * z; }, 0, 1, 1e-14, 1e-12);
      },
      0, t, 1e-13, 1e-11);
}

// C^4 piecewise polynomial, so sampled data interpolates to high order
double smooth_data(double z) {
  if (z <= 0 || z >= 4) return 0.0;
  return std::pow(z * (4 - z) / 4, 5);
}

}  // namespace

TEST(PerturbationField, SupportAndNorm) {
  auto h = PerturbationField::make(bump, 1.0);
  EXPECT_NEAR(h.sup_norm, 1.0, 1e-12);
  EXPECT_EQ(h(1.5), 0.0);
  EXPECT_GT(h(0.5), 0.0);
  EXPECT_EQ(PerturbationField::zero()(0.3), 0.0);
  EXPECT_THROW(PerturbationField::make(bump, 0.0), Error);
}

TEST(SqrtTimeNodes, Layout) {
  auto s = sqrt_time_nodes(0.5, 8);
  ASSERT_EQ(s.size(), 8u);
  EXPECT_EQ(s.front(), 0.0);
  EXPECT_EQ(s.back(), 0.5);
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GT(s[k], s[k - 1]);
  EXPECT_THROW(sqrt_time_nodes(0.0, 8), Error);
}

TEST(ApplyA, LinearDataAgainstBruteForce) {
  const double t = 0.25, b = 1.0;
  auto h = PerturbationField::make(bump, 1.0);
  auto grid = numerics::uniform_grid(0, 2.0, 201, Domain::half_line(2.0));
  auto times = sqrt_time_nodes(t, 8);
  auto g = SpaceTimeField::sample(grid, times, [](double z, double) { return z; });
  auto a = apply_A(b, h, g, t);
  for (double x : {0.0, 0.3, 0.5, 0.8, 1.2}) {
    const double v = numerics::interpolate(a, x);
    EXPECT_NEAR(v, apply_A_brute(b, t, x), 1e-6) << "x=" << x;
    // |A g| <= 2 sqrt(L t) |h| |d g| with L = 1
    EXPECT_LE(std::abs(v), 2 * std::sqrt(t) * h.sup_norm);
  }
}

TEST(ApplyA, ConcentratedMatchesNestedQuadrature) {
  const double b = 1.0, y0 = 0.3, t = 0.01;
  auto h = PerturbationField::make(bump, 1.0);
  auto dg = [&](double z, double s) { return model::k_density(b + 1, s, z, y0); };
  for (double x : {0.2, 0.3, 0.45}) {
    const double v = apply_A_concentrated(b, h, dg, y0, t, x);
    // s = t sin^2(th) removes both endpoint singularities; z = u^2 over 12 bridge widths
    const double ref = numerics::integrate_adaptive(
        [&](double th) {
          const double s = t * std::sin(th) * std::sin(th), lag = t - s;
          if (s <= 0 || lag <= 0) return 0.0;
          const double c = (std::sqrt(x) * s + std::sqrt(y0) * lag) / t, w = std::sqrt(s * lag / t);
          return 2 * t * std::sin(th) * std::cos(th) *
                 numerics::integrate_adaptive(
                     [&](double u) {
                       const double z = u * u;
                       return 2 * u * model::k_density(b, lag, x, z) * z * h(z) * dg(z, s);
                     },
                     std::max(0.0, c - 12 * w), std::min(1.0, c + 12 * w), 1e-14, 1e-11);
        },
        0, std::numbers::pi / 2, 1e-13, 1e-10);
    EXPECT_NEAR(v, ref, 1e-8 * std::abs(ref)) << "x=" << x;
  }
}

TEST(Constants, Examples) {
  EXPECT_NEAR(d_const(0), 1.0, 1e-15);
  EXPECT_NEAR(d_const(1), std::numbers::pi, 1e-14);
  EXPECT_NEAR(D_const(0), 1.0, 1e-15);
  EXPECT_NEAR(D_const(1), 2 * std::sqrt(std::numbers::pi), 1e-14);
}

TEST(TruncationBound, DecreasesAndChooseNIsMinimal) {
  BoundConstants c;
  c.M = 1.5;
  c.C_b = 3.0;
  c.L = 2.0;
  c.h_norms = {1.0};
  const double t = 1e-3;
  for (int j = 1; j < 10; ++j) EXPECT_LT(truncation_bound(j + 1, c, t), truncation_bound(j, c, t));
  const double tol = 1e-8;
  const int N = choose_N(t, tol, c);
  double tail = 0;
  for (int j = N + 1; j < N + 60; ++j) tail += truncation_bound(j, c, t);
  EXPECT_LT(tail, tol);
  if (N > 0) {
    double tail_less = 0;
    for (int j = N; j < N + 60; ++j) tail_less += truncation_bound(j, c, t);
    EXPECT_GE(tail_less, tol);
  }
  EXPECT_THROW(choose_N(2.0, tol, c), Error);
  EXPECT_THROW(truncation_bound(0, c, t), Error);
}

TEST(NeumannSeries, ZeroPerturbationIsTheModelSolution) {
  auto grid = numerics::uniform_grid(0, 4.0, 161, Domain::half_line(4.0));
  auto f = numerics::SampledField::sample(grid, smooth_data, 6);
  auto s = neumann_series(0.8, PerturbationField::zero(), f, 0.05, 3);
  ASSERT_EQ(s.iterates.size(), 4u);
  for (int j = 1; j <= 3; ++j) EXPECT_EQ(s.iterate_norms[static_cast<std::size_t>(j)], 0.0);
  auto ref = model::apply_kernel(model::ModelKernel(0.8, 0.05), smooth_data, grid);
  for (std::size_t m = 0; m < grid.size(); m += 10) {
    if (grid[m] > 2.5) break;
    EXPECT_NEAR(s.iterates[0].values[m], ref.field.values[m], 1e-7) << "x=" << grid[m];
  }
}

TEST(NeumannSeries, SolvesLinearPerturbedEquation) {
  // x d^2 + (b + c x) d applied to f = x has the solution (x + b/c) e^{ct} - b/c.
  const double b = 1.0, c = 0.5, t = 0.01;
  auto h = PerturbationField::make([c](double) { return c; }, 3.0);
  auto grid = numerics::uniform_grid(0, 4.0, 161, Domain::half_line(4.0));
  auto f = numerics::SampledField::sample(grid, [](double z) { return z; }, 6);
  auto s = neumann_series(b, h, f, t, 6);
  const auto u = s.sum();
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const double x = grid[m];
    if (x > 1.0) break;
    EXPECT_NEAR(u.values[m], (x + b / c) * std::exp(c * t) - b / c, 1e-6) << "x=" << x;
  }
  BoundConstants bc;
  bc.M = s.M;
  bc.C_b = 2 * s.C_b;
  bc.L = h.support;
  bc.h_norms = {h.sup_norm};
  for (int j = 1; j <= 6; ++j) EXPECT_LE(s.iterate_norms[static_cast<std::size_t>(j)], 10 * truncation_bound(j, bc, t));
}

TEST(NeumannSeries, IteratesScaleWithSqrtTimeForJumpData) {
  const double b = 1.0, y0 = 0.1;
  auto h = PerturbationField::make(bump, 1.0);
  auto dg = [b, y0](double z, double s) { return -model::k_density(b + 1, s, z, y0); };
  std::vector<double> X{y0};
  const double t1 = 1e-3, t2 = 1e-2;
  const double a1 = neumann_iterates_concentrated(b, h, dg, y0, t1, 1, X)(0, 0);
  const double a2 = neumann_iterates_concentrated(b, h, dg, y0, t2, 1, X)(0, 0);
  const double slope = std::log(std::abs(a2 / a1)) / std::log(t2 / t1);
  EXPECT_NEAR(slope, 0.5, 0.1);
}
