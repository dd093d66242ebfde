#pragma once

#include "epcag/schedule.hpp"
#include "epcag/system.hpp"
#include "epcag/trajectory.hpp"

#include <functional>

namespace epcag {

struct SolverOptions {
  /// Upper bound on the RK4 step; marches use min(step, gap/4) per interval.
  double step = 0.01;
  /// Fixed-point tolerance on the anchor value z(zeta_i).
  double tol = 1e-10;
  int max_iter = 200;
  /// When plain iteration fails, try a Newton solve on the anchor equation
  /// before giving up.
  bool newton_fallback = true;
  /// After a non-contracting solve, search for further anchor values.
  bool uniqueness_probe = true;
};

/// Classical RK4 over the whole interval [theta_i, theta_{i+1}] for
/// z' = A z + f(t, z, w) with w frozen, started from (t_anchor, z_anchor) and
/// run in both directions. Nodes land exactly on theta_i, zeta_i, t_anchor and
/// theta_{i+1}. Requires step <= (theta_{i+1} - theta_i) / 4.
Segment integrate_interval(const HybridSystem& sys, const ArgumentSchedule& sched, long i,
                           double t_anchor, const Vector& z_anchor, const Vector& w,
                           double step);

struct AnchorSolution {
  Vector w;            ///< z(zeta_i)
  int iterations = 0;  ///< fixed-point sweeps performed
  double last_delta = 0.0;
  std::vector<double> deltas;  ///< ||w_{m+1} - w_m||
  std::vector<double> ratios;  ///< deltas[m+1] / deltas[m]
  bool contracted = true;
  bool non_unique = false;
  std::vector<Vector> alternates;
  Segment segment;     ///< the interval integrated with the returned w
  double anchor_mismatch = 0.0;
};

/// Resolves the implicit anchor value w = z(zeta_i) on interval i given the
/// datum z(t_anchor) = z_anchor, by iterating w -> z(zeta_i; w).
///
/// Throws NonContractionError (carrying the observed ratio sequence) when no
/// fixed point is found, and propagates BlowUpError from the first
/// integration.
AnchorSolution solve_anchor(const HybridSystem& sys, const ArgumentSchedule& sched, long i,
                            double t_anchor, const Vector& z_anchor,
                            const SolverOptions& options);

/// Called after each interval; return false to stop the march early.
using IntervalObserver = std::function<bool(const Segment&)>;

/// Interval-by-interval continuation from (t0, z0) up to t_end.
Trajectory solve_forward(const HybridSystem& sys, const ArgumentSchedule& sched, double t0,
                         const Vector& z0, double t_end, const SolverOptions& options,
                         const IntervalObserver& observer = {});

/// Interval-by-interval continuation from (t0, z0) down to t_start. Intervals
/// whose anchor iteration expanded are flagged non-unique.
Trajectory solve_backward(const HybridSystem& sys, const ArgumentSchedule& sched, double t0,
                          const Vector& z0, double t_start, const SolverOptions& options,
                          const IntervalObserver& observer = {});

/// min(step, gap_i / 4).
double interval_step(const ArgumentSchedule& sched, long i, double step);

}  // namespace epcag
