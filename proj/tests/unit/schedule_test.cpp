#include "epcag/errors.hpp"
#include "epcag/schedule.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace epcag;

namespace {

ArgumentSchedule epca(long lo, long hi) {
  ScheduleParams p;
  p.i_min = lo;
  p.i_max = hi;
  return make_schedule(ScheduleKind::epca, p);
}

}  // namespace

TEST(Schedule, EpcaIsGreatestInteger) {
  const auto s = epca(-3, 5);
  EXPECT_EQ(s.intervals(), 8);
  EXPECT_DOUBLE_EQ(s.beta(2.7), 2.0);
  EXPECT_DOUBLE_EQ(s.beta(-0.3), -1.0);
  EXPECT_DOUBLE_EQ(s.beta(3.0), 3.0);  // left-closed
  EXPECT_DOUBLE_EQ(s.theta_bound(), 1.0);
  EXPECT_TRUE(s.is_periodic());
}

TEST(Schedule, AlternatingMatchesTwiceHalfInteger) {
  ScheduleParams p;
  p.i_min = -2;
  p.i_max = 3;
  const auto s = make_schedule(ScheduleKind::alternating, p);
  for (double t = -4.9; t < 4.9; t += 0.13) {
    EXPECT_DOUBLE_EQ(s.beta(t), 2.0 * std::floor((t + 1.0) / 2.0)) << t;
  }
  EXPECT_DOUBLE_EQ(s.theta_bound(), 2.0);
}

TEST(Schedule, RightEndpointBelongsToLastInterval) {
  const auto s = epca(0, 4);
  EXPECT_EQ(s.interval_index(4.0), 3);
  EXPECT_EQ(s.interval_index_left(0.0), 0);
  EXPECT_EQ(s.interval_index_left(2.0), 1);
  EXPECT_EQ(s.interval_index(2.0), 2);
}

TEST(Schedule, OutsideWindowThrows) {
  const auto s = epca(0, 4);
  EXPECT_THROW(s.beta(-0.01), WindowError);
  EXPECT_THROW(s.beta(4.5), WindowError);
  EXPECT_THROW(s.theta(5), WindowError);
  EXPECT_THROW(s.zeta(4), WindowError);
  try {
    s.beta(7.0);
  } catch (const WindowError& e) {
    EXPECT_DOUBLE_EQ(e.lo(), 0.0);
    EXPECT_DOUBLE_EQ(e.hi(), 4.0);
  }
}

TEST(Schedule, ValidationNamesFirstBadIndex) {
  try {
    ArgumentSchedule(5, {0.0, 1.0, 1.0, 2.0}, {0.5, 1.0, 1.5});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.index(), 6);
  }
  try {
    ArgumentSchedule(0, {0.0, 1.0, 2.0}, {0.5, 2.5});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.index(), 1);
  }
  EXPECT_THROW(ArgumentSchedule(0, {0.0, 1.0}, {0.5, 0.7}), ValidationError);
  EXPECT_THROW(ArgumentSchedule(0, {0.0, 3.0}, {0.5}, 2.0), ValidationError);
}

TEST(Schedule, ExplicitArraysKeepValues) {
  ScheduleParams p;
  p.i_min = -1;
  p.thetas = {-1.0, 0.5, 1.0, 3.0};
  p.zetas = {0.5, 0.5, 2.0};
  const auto s = make_schedule(ScheduleKind::explicit_arrays, p);
  EXPECT_EQ(s.i_max(), 2);
  EXPECT_DOUBLE_EQ(s.theta_bound(), 2.0);
  EXPECT_DOUBLE_EQ(s.beta(0.49), 0.5);
  EXPECT_DOUBLE_EQ(s.beta(0.5), 0.5);
  EXPECT_DOUBLE_EQ(s.beta(2.9), 2.0);
  EXPECT_FALSE(s.is_periodic());
}

TEST(Schedule, RandomizedIsReproducibleAndWellFormed) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ScheduleParams p;
    p.i_min = -10;
    p.i_max = 30;
    p.theta_bound = 1.7;
    p.origin = -4.0;
    p.seed = seed;
    const auto a = make_schedule(ScheduleKind::randomized, p);
    const auto b = make_schedule(ScheduleKind::randomized, p);
    EXPECT_EQ(a.thetas(), b.thetas());
    EXPECT_EQ(a.zetas(), b.zetas());
    EXPECT_DOUBLE_EQ(a.t_min(), -4.0);
    for (long i = a.i_min(); i < a.i_max(); ++i) {
      const double gap = a.theta(i + 1) - a.theta(i);
      EXPECT_GT(gap, 1.7 / 4.0);
      EXPECT_LE(gap, 1.7);
      EXPECT_GE(a.zeta(i), a.theta(i));
      EXPECT_LE(a.zeta(i), a.theta(i + 1));
      // beta is constant on the interval and equals the anchor
      EXPECT_DOUBLE_EQ(a.beta(0.5 * (a.theta(i) + a.theta(i + 1))), a.zeta(i));
    }
  }
  ScheduleParams p;
  p.seed = 1;
  const auto x = make_schedule(ScheduleKind::randomized, p);
  p.seed = 2;
  EXPECT_NE(x.thetas(), make_schedule(ScheduleKind::randomized, p).thetas());
}

TEST(Schedule, KindNamesRoundTrip) {
  for (auto k : {ScheduleKind::epca, ScheduleKind::alternating, ScheduleKind::explicit_arrays,
                 ScheduleKind::randomized}) {
    EXPECT_EQ(parse_schedule_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_schedule_kind("weekly"), ValidationError);
}
