#pragma once

// Successive approximation for integral systems of the form
//
//   x_c(t) = e^{B_c (t - s_c)} x_c(s_c) + \int_{s_c}^t e^{B_c (t - r)} g_c(r, y(r), y(beta(r))) dr
//
// on a finite grid, one such equation per coordinate block c. The grid is
// split into pieces at every theta_j and zeta_j so the integrand is smooth on
// each piece; each step of each piece uses the exact exponential of B_c and
// four-point interpolatory quadrature of the integrand.

#include "epcag/linalg.hpp"
#include "epcag/schedule.hpp"

#include <functional>
#include <vector>

namespace epcag::detail {

using BlockMap =
    std::function<Vector(double t, double anchor_time, const Vector& y, const Vector& ybar)>;

struct PicardBlock {
  Matrix b;
  int offset = 0;
  double start_time = 0.0;  ///< must be a breakpoint of the grid
  Vector datum;
};

enum class PicardInit { zero, linear };

struct PicardProblem {
  const ArgumentSchedule* sched = nullptr;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> extra_breaks;
  double step = 0.01;
  int dim = 0;
  BlockMap g;
  std::vector<PicardBlock> blocks;
  double tol = 1e-10;
  int max_iter = 200;
  PicardInit init = PicardInit::zero;
};

struct PicardResult {
  std::vector<double> times;
  std::vector<Vector> states;
  int iterations = 0;
  std::vector<double> deltas;
  double last_delta = 0.0;

  /// State at a grid node time (exact) or by linear interpolation.
  Vector at(double t) const;
};

/// Throws DivergenceError when the sup-norm deltas stop decreasing or max_iter
/// is exhausted, and WindowError when the domain leaves the schedule window.
PicardResult picard_solve(const PicardProblem& problem);

}  // namespace epcag::detail
