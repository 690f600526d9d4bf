#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "degenheat/error.hpp"
#include "degenheat/wf_solver.hpp"

using namespace degenheat;
using namespace degenheat::wf;

TEST(DriftSpec, PolynomialEndpointsAndParts) {
  auto d = DriftSpec::genetics(0.5, 1.5, 2.0);
  EXPECT_NEAR(d.b0(), 0.5, 1e-15);
  EXPECT_NEAR(d.b1(), 1.5, 1e-15);
  EXPECT_EQ(d.degree(), 2);
  for (double x : {0.0, 0.2, 0.7, 1.0}) {
    EXPECT_NEAR(d(x), 0.5 * (1 - x) - 1.5 * x + 2.0 * x * (1 - x), 1e-14);
    EXPECT_NEAR(d.selection_part(x), 2.0, 1e-13);
    EXPECT_NEAR(d.selection_integral(x), 2.0 * x, 1e-13);
  }
  auto r = d.reflected();
  for (double y : {0.1, 0.5, 0.9}) EXPECT_NEAR(r(y), -d(1 - y), 1e-14);
  EXPECT_NEAR(r.b0(), d.b1(), 1e-15);
  EXPECT_NEAR(d.slope_from_left(0.0), -2.0 + 2.0, 1e-13);
  EXPECT_NEAR(d.slope_from_left(0.5), (d(0.5) - 0.5) / 0.5, 1e-13);
}

TEST(DriftSpec, TrailingZerosAndKeys) {
  auto a = DriftSpec::polynomial({1.0, -2.0, 0.0, 0.0});
  auto b = DriftSpec::mutation(1.0, 1.0);
  EXPECT_TRUE(a.is_linear());
  EXPECT_EQ(a.key(), b.key());
  EXPECT_NE(a.key(), DriftSpec::mutation(1.0, 2.0).key());
}

TEST(DriftSpec, RejectsDriftPointingOut) {
  EXPECT_THROW(DriftSpec::polynomial({-0.1, 0.0}), Error);
  EXPECT_THROW(DriftSpec::polynomial({0.0, 0.5}), Error);
  EXPECT_NO_THROW(DriftSpec::polynomial({-1e-15, 0.0}));
}

TEST(DriftSpec, GeneralMatchesPolynomial) {
  auto p = DriftSpec::genetics(1.0, 2.0, 3.0);
  auto g = DriftSpec::general([&](double x) { return p(x); });
  EXPECT_FALSE(g.is_polynomial());
  EXPECT_NEAR(g.b0(), 1.0, 1e-12);
  EXPECT_NEAR(g.b1(), 2.0, 1e-12);
  for (double x : {0.0, 0.05, 0.5, 0.95, 1.0}) {
    EXPECT_NEAR(g.slope_from_left(x), p.slope_from_left(x), 1e-6) << x;
    EXPECT_NEAR(g.selection_part(x), 3.0, 1e-6) << x;
  }
  EXPECT_NEAR(g.selection_integral(0.6), 1.8, 1e-8);
}

TEST(Smoothstep, EndsMonotoneAndDerivative) {
  EXPECT_EQ(smoothstep(-1.0), 0.0);
  EXPECT_EQ(smoothstep(2.0), 1.0);
  EXPECT_NEAR(smoothstep(0.5), 0.5, 1e-15);
  double prev = 0;
  for (int k = 1; k <= 100; ++k) {
    const double u = k / 100.0;
    EXPECT_GE(smoothstep(u), prev);
    prev = smoothstep(u);
    if (k < 100) {
      const double h = 1e-6;
      EXPECT_NEAR(smoothstep_derivative(u), (smoothstep(u + h) - smoothstep(u - h)) / (2 * h), 1e-7);
    }
  }
}

TEST(Cutoffs, PlateausAndSupports) {
  Cutoffs c;
  EXPECT_EQ(c.phi_l(0.0), 1.0);
  EXPECT_EQ(c.phi_l(c.left_one), 1.0);
  EXPECT_EQ(c.phi_l(c.left_zero + 1e-9), 0.0);
  EXPECT_EQ(c.phi_r(1.0), 1.0);
  EXPECT_EQ(c.phi_r(c.right_zero - 1e-9), 0.0);
  EXPECT_EQ(c.phi_0(0.2), 1.0);
  EXPECT_EQ(c.phi_0(0.7), 0.0);
  const double h = 1e-6;
  for (double y : {0.7, 0.72, 0.27, 0.3}) {
    EXPECT_NEAR(c.dphi_l(y), (c.phi_l(y + h) - c.phi_l(y - h)) / (2 * h), 1e-5);
    EXPECT_NEAR(c.dphi_r(y), (c.phi_r(y + h) - c.phi_r(y - h)) / (2 * h), 1e-5);
  }
}

TEST(LocalChart, RoundTripJacobianAndIndex) {
  auto d = DriftSpec::genetics(0.7, 1.3, 1.0);
  for (auto end : {ChartEnd::left, ChartEnd::right}) {
    auto ch = local_chart(d, end);
    EXPECT_NEAR(ch.b_index, end == ChartEnd::left ? 0.7 : 1.3, 1e-14);
    EXPECT_NEAR(ch.pullback_drift(0.0), ch.b_index, 1e-12);
    for (double y : {1e-6, 0.01, 0.3, 0.6, 0.95}) {
      EXPECT_NEAR(ch.from_chart(ch.to_chart(y)), y, 1e-13);
      const double yy = end == ChartEnd::left ? y : 1 - y;
      const double exact = std::asin(std::sqrt(yy)) / std::sqrt(yy * (1 - yy));
      EXPECT_NEAR(ch.jacobian(y), exact, 1e-12 * exact) << y;
      if (y > 1e-3) {
        const double h = 1e-5 * std::min(y, 1 - y);
        const double fd = std::abs(ch.to_chart(y + h) - ch.to_chart(y - h)) / (2 * h);
        EXPECT_NEAR(ch.jacobian(y), fd, 1e-6 * fd) << y;
      }
    }
  }
}

TEST(NormalForm, IdentityAndScaledDiffusion) {
  GeneralCoefficients id{[](double x) { return x * (1 - x); }, [](double x) { return 1 - 2 * x; }};
  auto nf = reduce_to_normal_form(id);
  EXPECT_NEAR(nf.time_scale, 1.0, 1e-12);
  for (double x : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(nf.xi(x), x, 1e-12);
    EXPECT_NEAR(nf.drift(x), 1 - 2 * x, 1e-6);
  }
  // a = 2x(1-x), b = 2(1-2x) is twice the identity case, so the drift is unchanged and time doubles.
  GeneralCoefficients twice{[](double x) { return 2 * x * (1 - x); }, [](double x) { return 2 * (1 - 2 * x); }};
  auto nf2 = reduce_to_normal_form(twice);
  EXPECT_NEAR(nf2.time_scale, 2.0, 1e-10);
  for (double x : {0.0, 0.3, 1.0}) EXPECT_NEAR(nf2.drift(x), 1 - 2 * x, 1e-6);
}

TEST(NormalForm, ShiftedIntervalRoundTrip) {
  GeneralCoefficients gc{[](double x) { return (x - 1) * (3 - x) * (1 + 0.2 * x); },
                         [](double x) { return 0.5 * (3 - x) - 0.25 * (x - 1); }, 1.0, 3.0};
  auto nf = reduce_to_normal_form(gc);
  EXPECT_NEAR(nf.xi(1.0), 0.0, 1e-12);
  EXPECT_NEAR(nf.xi(3.0), 1.0, 1e-12);
  for (double x : {1.2, 2.0, 2.7}) EXPECT_NEAR(nf.inverse(nf.xi(x)), x, 1e-10);
  EXPECT_GE(nf.drift.b0(), 0.0);
  EXPECT_GE(nf.drift.b1(), 0.0);
  EXPECT_THROW(reduce_to_normal_form({[](double) { return -1.0; }, [](double) { return 0.0; }}), Error);
}

TEST(StepSize, HalvesUntilBelowCap) {
  EXPECT_DOUBLE_EQ(step_size(0.1, 1.5e-4), 0.1 / 1024);
  EXPECT_DOUBLE_EQ(step_size(1e-4, 1.5e-4), 1e-4);
  EXPECT_THROW(step_size(0.0, 1.5e-4), Error);
}

// All solver tests below use t = 0.05 * 2^k so they share the step tau = 0.05 / 512.

TEST(SolveBackward, PureDiffusionQuadratic) {
  auto d = DriftSpec::polynomial({0.0});
  numerics::Grid out = numerics::uniform_grid(0, 1, 21, numerics::Domain::unit());
  for (double t : {0.05, 0.1}) {
    auto u = solve_backward(d, [](double x) { return x * x; }, t, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = out[i];
      EXPECT_NEAR(u.values[i], x - (x - x * x) * std::exp(-2 * t), 1e-5) << "t=" << t << " x=" << x;
    }
  }
}

TEST(SolveBackward, MutationMeanIsExact) {
  // d/dt E[X] = b0 - (b0+b1) E[X]
  auto d = DriftSpec::mutation(1.0, 2.0);
  numerics::Grid out = numerics::uniform_grid(0, 1, 11, numerics::Domain::unit());
  const double t = 0.1, m = 1.0 / 3.0;
  auto u = solve_backward(d, [](double x) { return x; }, t, out);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_NEAR(u.values[i], m + (out[i] - m) * std::exp(-3 * t), 1e-6) << out[i];
}

TEST(SolveBackward, ConstantsArePreserved) {
  auto d = DriftSpec::genetics(0.5, 0.5, 2.0);
  auto nodes = solve_backward_nodes(d, [](double) { return 1.0; }, 0.05);
  for (double v : nodes) EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(SolveForward, MassAndMeanForMutation) {
  auto d = DriftSpec::mutation(1.0, 2.0);
  const double t = 0.1;
  auto m = solve_forward(d, [](double) { return 1.0; }, t);
  EXPECT_NEAR(m.mass(), 1.0, 1e-8);
  EXPECT_NEAR(m.atom0, 0.0, 1e-12);
  EXPECT_NEAR(m.atom1, 0.0, 1e-12);
  const double mean = 1.0 / 3.0 + (0.5 - 1.0 / 3.0) * std::exp(-3 * t);
  EXPECT_NEAR(m.pair([](double y) { return y; }), mean, 1e-6);
  EXPECT_GT(m.density_at(0.5), 0.0);
}

TEST(SolveForward, AbsorbingEndsCollectMass) {
  auto d = DriftSpec::polynomial({0.0});
  auto m = solve_forward(d, [](double) { return 1.0; }, 0.1);
  EXPECT_NEAR(m.mass(), 1.0, 1e-8);
  EXPECT_GT(m.atom0, 0.0);
  EXPECT_NEAR(m.atom0, m.atom1, 1e-8);
  // E[X] is a martingale
  EXPECT_NEAR(m.pair([](double y) { return y; }), 0.5, 1e-6);
}

TEST(Propagator, ComposesSteps) {
  auto d = DriftSpec::mutation(1.0, 1.0);
  Propagator p(d, 0.05);
  EXPECT_EQ(p.steps(), 512);
  EXPECT_DOUBLE_EQ(p.tau(), 0.05 / 512);
  EXPECT_GT(p.N(), 0);
  const auto& Q = p.matrix();
  // rows sum to one since constants are preserved
  for (Eigen::Index i = 0; i < Q.rows(); ++i) EXPECT_NEAR(Q.row(i).sum(), 1.0, 1e-9);
}

TEST(SolverTerms, GrowsAsToleranceShrinks) {
  auto d = DriftSpec::mutation(1.0, 1.0);
  const double tau = 0.05 / 512;
  EXPECT_LE(solver_terms(d, tau, 0.05, 1e-4), solver_terms(d, tau, 0.05, 1e-8));
}

TEST(SolverGuard, UnreachableToleranceIsReported) {
  auto d = DriftSpec::mutation(1.0, 1.0);
  auto coarse = numerics::SampledField::sample(numerics::uniform_grid(0, 1, 17, numerics::Domain::unit()),
                                               [](double x) { return std::sin(3 * x); });
  try {
    solve_backward(d, coarse, 0.05, 1e-12);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_NE(std::string(e.what()).find("refine"), std::string::npos) << e.what();
  }
  auto u = solve_backward(d, coarse, 0.05, 1e-3);
  EXPECT_EQ(u.values.size(), 17u);
}
