#include "epcag/solver.hpp"

#include "epcag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace epcag {
namespace {

bool near(double a, double b) {
  return std::abs(a - b) <= 1e-13 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Node times from t_anchor outward to the given breakpoints, each sub-piece
// split into equal steps no longer than `step`.
std::vector<double> march_nodes(double t_anchor, std::vector<double> stops, double step) {
  std::vector<double> nodes{t_anchor};
  double t = t_anchor;
  for (double stop : stops) {
    if (near(stop, t)) continue;
    const double len = stop - t;
    const auto count = static_cast<int>(std::ceil(std::abs(len) / step - 1e-9));
    for (int k = 1; k < count; ++k) nodes.push_back(t + len * k / count);
    nodes.push_back(stop);
    t = stop;
  }
  return nodes;
}

Vector rk4_step(const HybridSystem& sys, double t, double h, const Vector& z, const Vector& k1,
                double anchor_time, const Vector& w) {
  const Vector k2 = sys.rhs(t + 0.5 * h, anchor_time, z + (0.5 * h) * k1, w);
  const Vector k3 = sys.rhs(t + 0.5 * h, anchor_time, z + (0.5 * h) * k2, w);
  const Vector k4 = sys.rhs(t + h, anchor_time, z + h * k3, w);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates along `nodes` (starting at nodes[0] with z0); returns states and slopes.
void integrate_along(const HybridSystem& sys, const std::vector<double>& nodes, const Vector& z0,
                     double anchor_time, const Vector& w, std::vector<Vector>& states,
                     std::vector<Vector>& slopes) {
  states.clear();
  slopes.clear();
  states.push_back(z0);
  slopes.push_back(sys.rhs(nodes[0], anchor_time, z0, w));
  for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
    const double h = nodes[k + 1] - nodes[k];
    Vector next = rk4_step(sys, nodes[k], h, states[k], slopes[k], anchor_time, w);
    if (!next.allFinite()) {
      std::ostringstream os;
      os << "state became non-finite after t = " << nodes[k];
      throw BlowUpError(os.str(), nodes[k]);
    }
    Vector slope = sys.rhs(nodes[k + 1], anchor_time, next, w);
    if (!slope.allFinite()) {
      std::ostringstream os;
      os << "right-hand side became non-finite at t = " << nodes[k + 1];
      throw BlowUpError(os.str(), nodes[k + 1]);
    }
    states.push_back(std::move(next));
    slopes.push_back(std::move(slope));
  }
}

// Value of the segment at an exact node time.
Vector node_value(const Segment& seg, double t) {
  auto it = std::lower_bound(seg.times.begin(), seg.times.end(), t);
  if (it != seg.times.end() && near(*it, t)) return seg.states[it - seg.times.begin()];
  if (it != seg.times.begin() && near(*std::prev(it), t)) {
    return seg.states[std::prev(it) - seg.times.begin()];
  }
  return seg.at(t);
}

struct AnchorMap {
  const HybridSystem& sys;
  const ArgumentSchedule& sched;
  long i;
  double t_anchor;
  const Vector& z_anchor;
  double step;
  double zeta;

  Segment segment(const Vector& w) const {
    return integrate_interval(sys, sched, i, t_anchor, z_anchor, w, step);
  }
  Vector operator()(const Vector& w) const { return node_value(segment(w), zeta); }
};

std::optional<Vector> newton_anchor(const AnchorMap& g, const Vector& seed, double tol) {
  const auto n = seed.size();
  Vector w = seed;
  Vector gw;
  try {
    gw = g(w);
  } catch (const BlowUpError&) {
    return std::nullopt;
  }
  Vector r = gw - w;
  for (int it = 0; it < 60; ++it) {
    if (r.norm() < tol) return w;
    Matrix jac(n, n);
    try {
      for (Eigen::Index j = 0; j < n; ++j) {
        Vector wp = w;
        const double h = 1e-7 * std::max(1.0, std::abs(w(j)));
        wp(j) += h;
        jac.col(j) = (g(wp) - gw) / h;
      }
    } catch (const BlowUpError&) {
      return std::nullopt;
    }
    jac -= Matrix::Identity(n, n);
    const Vector dir = jac.fullPivLu().solve(-r);
    if (!dir.allFinite()) return std::nullopt;
    double lambda = 1.0;
    bool accepted = false;
    while (lambda > 1e-6) {
      const Vector trial = w + lambda * dir;
      try {
        const Vector gt = g(trial);
        const Vector rt = gt - trial;
        if (rt.allFinite() && rt.norm() < (1.0 - 1e-4 * lambda) * r.norm()) {
          w = trial;
          gw = gt;
          r = rt;
          accepted = true;
          break;
        }
      } catch (const BlowUpError&) {
      }
      lambda *= 0.5;
    }
    if (!accepted) return std::nullopt;
  }
  if (r.norm() < tol) return w;
  return std::nullopt;
}

}  // namespace

double interval_step(const ArgumentSchedule& sched, long i, double step) {
  return std::min(step, (sched.theta(i + 1) - sched.theta(i)) / 4.0);
}

Segment integrate_interval(const HybridSystem& sys, const ArgumentSchedule& sched, long i,
                           double t_anchor, const Vector& z_anchor, const Vector& w,
                           double step) {
  const double lo = sched.theta(i);
  const double hi = sched.theta(i + 1);
  const double zeta = sched.zeta(i);
  if (!(step > 0.0) || step > (hi - lo) / 4.0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "step " << step << " must lie in (0, " << (hi - lo) / 4.0 << "] on interval " << i;
    throw ParameterError("solver", os.str());
  }
  if (t_anchor < lo - 1e-13 * std::max(1.0, std::abs(lo)) ||
      t_anchor > hi + 1e-13 * std::max(1.0, std::abs(hi))) {
    std::ostringstream os;
    os << "anchor time " << t_anchor << " outside interval [" << lo << ", " << hi << "]";
    throw ParameterError("solver", os.str());
  }
  if (z_anchor.size() != sys.dim() || w.size() != sys.dim()) {
    throw ParameterError("solver", "state dimension does not match the system");
  }
  t_anchor = std::clamp(t_anchor, lo, hi);

  std::vector<double> right_stops;
  std::vector<double> left_stops;
  if (zeta > t_anchor) right_stops.push_back(zeta);
  right_stops.push_back(hi);
  if (zeta < t_anchor) left_stops.push_back(zeta);
  left_stops.push_back(lo);

  const auto right = march_nodes(t_anchor, right_stops, step);
  const auto left = march_nodes(t_anchor, left_stops, step);

  std::vector<Vector> rs, rsl, ls, lsl;
  integrate_along(sys, right, z_anchor, zeta, w, rs, rsl);
  integrate_along(sys, left, z_anchor, zeta, w, ls, lsl);

  Segment seg;
  seg.interval = i;
  const std::size_t total = left.size() + right.size() - 1;
  seg.times.reserve(total);
  seg.states.reserve(total);
  seg.slopes.reserve(total);
  for (std::size_t k = left.size(); k-- > 1;) {
    seg.times.push_back(left[k]);
    seg.states.push_back(std::move(ls[k]));
    seg.slopes.push_back(std::move(lsl[k]));
  }
  for (std::size_t k = 0; k < right.size(); ++k) {
    seg.times.push_back(right[k]);
    seg.states.push_back(std::move(rs[k]));
    seg.slopes.push_back(std::move(rsl[k]));
  }
  return seg;
}

AnchorSolution solve_anchor(const HybridSystem& sys, const ArgumentSchedule& sched, long i,
                            double t_anchor, const Vector& z_anchor,
                            const SolverOptions& options) {
  const double step = interval_step(sched, i, options.step);
  const AnchorMap g{sys, sched, i, t_anchor, z_anchor, step, sched.zeta(i)};

  AnchorSolution out;
  // Initial guess: the anchored slot frozen at the datum. When the datum sits
  // at zeta_i it is already the anchor value.
  const Vector w0 = near(t_anchor, g.zeta) ? z_anchor : g(z_anchor);
  Vector w = w0;
  bool converged = false;
  bool expanded = false;
  int rising = 0;
  const double blowup_scale = 1e10 * (1.0 + w0.norm() + z_anchor.norm());

  Segment last;
  for (int m = 0; m < options.max_iter; ++m) {
    Vector next;
    try {
      last = g.segment(w);
      next = node_value(last, g.zeta);
    } catch (const BlowUpError&) {
      expanded = true;
      break;
    }
    const double delta = (next - w).norm();
    out.iterations = m + 1;
    if (!std::isfinite(delta)) {
      expanded = true;
      break;
    }
    if (!out.deltas.empty() && out.deltas.back() > 0.0) {
      const double ratio = delta / out.deltas.back();
      out.ratios.push_back(ratio);
      if (ratio > 1.0) {
        expanded = true;
        ++rising;
      } else {
        rising = 0;
      }
    }
    out.deltas.push_back(delta);
    w = std::move(next);
    if (delta < options.tol) {
      converged = true;
      break;
    }
    if (delta > blowup_scale || rising >= 25) break;
  }
  out.last_delta = out.deltas.empty() ? 0.0 : out.deltas.back();

  if (!converged) {
    out.contracted = false;
    std::optional<Vector> root;
    if (options.newton_fallback) {
      for (const Vector& seed : {w0, z_anchor, Vector(Vector::Zero(sys.dim()))}) {
        root = newton_anchor(g, seed, options.tol);
        if (root) break;
      }
    }
    if (!root) {
      std::ostringstream os;
      os << "anchor iteration on interval " << i << " did not converge after "
         << out.iterations << " sweeps (last delta " << out.last_delta << ")";
      throw NonContractionError(os.str(), out.ratios, i);
    }
    w = *root;
  }

  out.non_unique = expanded;
  if ((expanded || !converged) && options.uniqueness_probe) {
    const double scale = 1.0 + w.norm();
    std::vector<Vector> seeds{Vector(Vector::Zero(sys.dim())), -w, 2.0 * w, z_anchor, w0};
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      Vector e = Vector::Zero(w.size());
      e(k) = scale;
      seeds.push_back(w + e);
      seeds.push_back(w - e);
    }
    for (const auto& seed : seeds) {
      auto root = newton_anchor(g, seed, options.tol);
      if (!root) continue;
      const double sep_tol = 1e-6 * scale;
      if ((*root - w).norm() <= sep_tol) continue;
      const bool known = std::any_of(out.alternates.begin(), out.alternates.end(),
                                     [&](const Vector& a) { return (a - *root).norm() <= sep_tol; });
      if (!known) out.alternates.push_back(*root);
    }
    if (!out.alternates.empty()) out.non_unique = true;
  }

  // After plain convergence the last sweep already reproduces w at zeta_i.
  out.segment = converged ? std::move(last) : g.segment(w);
  out.anchor_mismatch = (node_value(out.segment, g.zeta) - w).norm();
  out.w = std::move(w);
  return out;
}

namespace {

IntervalReport make_report(long i, const AnchorSolution& sol) {
  IntervalReport r;
  r.interval = i;
  r.iterations = sol.iterations;
  r.last_delta = sol.last_delta;
  r.deltas = sol.deltas;
  r.ratios = sol.ratios;
  r.contracted = sol.contracted;
  r.non_unique = sol.non_unique;
  r.alternate_anchors = sol.alternates;
  r.anchor_mismatch = sol.anchor_mismatch;
  return r;
}

AnchorSolution tagged_solve(const HybridSystem& sys, const ArgumentSchedule& sched, long i,
                            double t_anchor, const Vector& z_anchor,
                            const SolverOptions& options) {
  try {
    return solve_anchor(sys, sched, i, t_anchor, z_anchor, options);
  } catch (const BlowUpError& e) {
    throw BlowUpError(std::string(e.what()) + " (interval " + std::to_string(i) + ")",
                      e.last_finite_time());
  }
}

}  // namespace

Trajectory solve_forward(const HybridSystem& sys, const ArgumentSchedule& sched, double t0,
                         const Vector& z0, double t_end, const SolverOptions& options,
                         const IntervalObserver& observer) {
  if (!(t0 < t_end)) throw ParameterError("solver", "forward solve needs t0 < t_end");
  if (t0 < sched.t_min() || t_end > sched.t_max()) {
    std::ostringstream os;
    os << "span [" << t0 << ", " << t_end << "] exceeds schedule window [" << sched.t_min()
       << ", " << sched.t_max() << "]";
    throw WindowError(os.str(), sched.t_min(), sched.t_max());
  }
  Trajectory traj(Direction::forward);
  long i = sched.interval_index(t0);
  double t_a = t0;
  Vector z_a = z0;
  while (true) {
    auto sol = tagged_solve(sys, sched, i, t_a, z_a, options);
    const Vector end = sol.segment.back();
    const bool keep_going = !observer || observer(sol.segment);
    traj.add(std::move(sol.segment), sol.w, make_report(i, sol));
    const double hi = sched.theta(i + 1);
    if (!keep_going || hi >= t_end || near(hi, t_end)) break;
    t_a = hi;
    z_a = end;
    ++i;
  }
  return traj;
}

Trajectory solve_backward(const HybridSystem& sys, const ArgumentSchedule& sched, double t0,
                          const Vector& z0, double t_start, const SolverOptions& options,
                          const IntervalObserver& observer) {
  if (!(t_start < t0)) throw ParameterError("solver", "backward solve needs t_start < t0");
  if (t_start < sched.t_min() || t0 > sched.t_max()) {
    std::ostringstream os;
    os << "span [" << t_start << ", " << t0 << "] exceeds schedule window [" << sched.t_min()
       << ", " << sched.t_max() << "]";
    throw WindowError(os.str(), sched.t_min(), sched.t_max());
  }
  Trajectory traj(Direction::backward);
  long i = sched.interval_index_left(t0);
  double t_a = t0;
  Vector z_a = z0;
  while (true) {
    auto sol = tagged_solve(sys, sched, i, t_a, z_a, options);
    const Vector start = sol.segment.front();
    const bool keep_going = !observer || observer(sol.segment);
    traj.add(std::move(sol.segment), sol.w, make_report(i, sol));
    const double lo = sched.theta(i);
    if (!keep_going || lo <= t_start || near(lo, t_start)) break;
    t_a = lo;
    z_a = start;
    --i;
  }
  return traj;
}

}  // namespace epcag
