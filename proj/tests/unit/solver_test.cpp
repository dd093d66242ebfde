#include "epcag/analysis.hpp"
#include "epcag/catalog.hpp"
#include "epcag/errors.hpp"
#include "epcag/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace epcag;

namespace {

HybridSystem scalar_linear(double a, double b) {
  return make_catalog_system("epca-linear", {{"b", b}}, Matrix::Constant(1, 1, a));
}

HybridSystem example1_system() {
  SystemOptions opt;
  opt.validate = false;
  return make_catalog_system("example1-quadratic", {{"R", 10.0}}, Matrix::Constant(1, 1, 3.0), opt);
}

ArgumentSchedule alternating(long lo, long hi) {
  ScheduleParams p;
  p.i_min = lo;
  p.i_max = hi;
  return make_schedule(ScheduleKind::alternating, p);
}

}  // namespace

TEST(Solver, LinearOnRandomScheduleMatchesClosedForm) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ScheduleParams p;
    p.i_min = 0;
    p.i_max = 8;
    p.theta_bound = 0.8;
    p.seed = seed;
    const auto sched = make_schedule(ScheduleKind::randomized, p);
    const double a = -0.7, b = 0.3;
    const auto sys = scalar_linear(a, b);
    const oracle::LinearMarch ref{a, b, sched.thetas(), sched.zetas(), 1.5};
    const auto tr = solve_forward(sys, sched, sched.t_min(), Vector::Constant(1, 1.5),
                                  sched.t_max(), SolverOptions{.step = 0.01, .tol = 1e-13});
    for (int k = 0; k <= 200; ++k) {
      const double t = sched.t_min() + (sched.t_max() - sched.t_min()) * k / 200.0;
      EXPECT_NEAR(tr.at(t)(0), ref.at(t), 1e-9 * std::abs(ref.at(t)) + 1e-12) << seed << " " << t;
    }
  }
}

TEST(Solver, BackwardRetracesForward) {
  ScheduleParams p;
  p.i_min = -5;
  p.i_max = 5;
  p.theta_bound = 1.0;
  p.origin = -5.0;
  p.seed = 9;
  const auto sched = make_schedule(ScheduleKind::randomized, p);
  const auto sys = make_catalog_system("tanh-coupled", {{"eps", 0.05}},
                                       (Matrix(2, 2) << -0.5, 1.0, -1.0, -0.2).finished());
  Vector z0(2);
  z0 << 0.4, -0.3;
  const SolverOptions opt{.step = 0.01, .tol = 1e-13};
  const double t0 = sched.theta(-3);
  const auto fwd = solve_forward(sys, sched, t0, z0, sched.theta(3), opt);
  const auto back = solve_backward(sys, sched, sched.theta(3), fwd.at(sched.theta(3)), t0, opt);
  EXPECT_LT((back.at(t0) - z0).norm(), 1e-9);
  EXPECT_FALSE(back.non_unique());
  EXPECT_LT(fwd.continuity_defect(), 1e-12);
  EXPECT_LT(fwd.anchor_defect(sched.zetas(), sched.i_min()), 1e-10);
}

TEST(Solver, NodesLandOnBreakpointsAndAnchors) {
  const auto sched = alternating(0, 3);
  const auto sys = scalar_linear(-1.0, 0.2);
  const auto seg = integrate_interval(sys, sched, 1, 1.3, Vector::Ones(1), Vector::Ones(1), 0.07);
  auto has = [&](double t) {
    return std::any_of(seg.times.begin(), seg.times.end(), [t](double s) { return s == t; });
  };
  EXPECT_TRUE(has(1.0));
  EXPECT_TRUE(has(2.0));
  EXPECT_TRUE(has(1.3));
  EXPECT_TRUE(has(3.0));
  EXPECT_TRUE(std::is_sorted(seg.times.begin(), seg.times.end()));
  EXPECT_THROW(integrate_interval(sys, sched, 1, 1.3, Vector::Ones(1), Vector::Ones(1), 0.6),
               ParameterError);
}

TEST(Solver, FourthOrderOnExample1Interval) {
  const auto sched = alternating(0, 2);
  const auto sys = example1_system();
  const double z = 0.5, exact = oracle::example1_at(z, 1.0);
  auto err = [&](double h) {
    const Vector w = Vector::Constant(1, z);
    return std::abs(integrate_interval(sys, sched, 0, 0.0, w, w, h).back()(0) - exact);
  };
  const double ratio = err(0.1) / err(0.05);
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Solver, Example1CollisionFlagsNonUniqueness) {
  const auto sched = alternating(0, 2);
  const auto sys = example1_system();
  const double z0 = 1.0, z1 = oracle::example1_collision_sum() - z0;
  const double X = oracle::example1_at(z0, 1.0);
  EXPECT_NEAR(oracle::example1_at(z1, 1.0), X, 1e-10);
  const auto back = solve_backward(sys, sched, 1.0, Vector::Constant(1, X), -1.0,
                                   {.step = 0.001, .tol = 1e-13});
  ASSERT_TRUE(back.non_unique());
  const auto& rep = back.reports().front();
  ASSERT_FALSE(rep.alternate_anchors.empty());
  // the solver's anchor and the alternate are the two collision roots
  const double w = back.anchors().at(0)(0);
  const double alt = rep.alternate_anchors.front()(0);
  EXPECT_NEAR(std::min(w, alt), std::min(z0, z1), 1e-8);
  EXPECT_NEAR(std::max(w, alt), std::max(z0, z1), 1e-8);
}

TEST(Solver, Example1ForwardBelowThresholdHasNoContinuation) {
  const auto sched = alternating(0, 2);
  const auto sys = example1_system();
  EXPECT_LT(-10.0, oracle::example1_forward_threshold());
  try {
    solve_forward(sys, sched, -1.0, Vector::Constant(1, -10.0), 1.0, {});
    FAIL() << "expected NonContractionError";
  } catch (const NonContractionError& e) {
    EXPECT_EQ(e.interval(), 0);
    EXPECT_EQ(e.module(), "solver");
  }
}

TEST(Solver, WindowAndBlowUp) {
  const auto sched = alternating(0, 2);
  const auto sys = scalar_linear(-1.0, 0.1);
  EXPECT_THROW(solve_forward(sys, sched, 0.0, Vector::Ones(1), 7.0, {}), WindowError);
  EXPECT_THROW(solve_backward(sys, sched, 0.0, Vector::Ones(1), -2.0, {}), WindowError);

  const auto hot = example1_system();
  EXPECT_THROW(solve_forward(hot, sched, 0.0, Vector::Constant(1, -50.0), 3.0, {}), Error);
}

TEST(Solver, ObserverStopsMarch) {
  ScheduleParams p;
  p.i_min = 0;
  p.i_max = 20;
  const auto sched = make_schedule(ScheduleKind::epca, p);
  const auto sys = scalar_linear(0.5, 0.0);
  int calls = 0;
  const auto tr = solve_forward(sys, sched, 0.0, Vector::Ones(1), 20.0, {},
                                [&](const Segment&) { return ++calls < 3; });
  EXPECT_EQ(calls, 3);
  EXPECT_DOUBLE_EQ(tr.t_max(), 3.0);
}

// Under the smallness condition the anchor deltas contract at least as fast
// as the analytic bound.
TEST(Solver, AnchorIterationContractsWithinBound) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    ScheduleParams p;
    p.i_min = 0;
    p.i_max = 6;
    p.theta_bound = 1.0;
    p.seed = 100 + trial;
    const auto sched = make_schedule(ScheduleKind::randomized, p);
    Matrix a(2, 2);
    a << -1.0 + 0.2 * u(rng), 0.3 * u(rng), 0.3 * u(rng), -0.5 + 0.2 * u(rng);
    const auto sys = make_catalog_system("tanh-coupled", {{"eps", 0.02}}, a);
    const auto split = spectral_split(a);
    const auto bundle = compute_constants(a, split, sched, sys.lipschitz(), 0.5 * split.sigma);
    ASSERT_TRUE(bundle.c5_all());
    Vector z0(2);
    z0 << u(rng), u(rng);
    for (long i = 0; i < 6; ++i) {
      const auto sol = solve_anchor(sys, sched, i, sched.theta(i), z0, {.tol = 1e-13});
      ASSERT_TRUE(sol.contracted);
      for (double r : sol.ratios) EXPECT_LE(r, bundle.anchor_ratio_bound() + 0.05);
      z0 = sol.segment.back();
    }
  }
}
