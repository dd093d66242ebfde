#pragma once

#include "epcag/linalg.hpp"

#include <map>
#include <string>
#include <vector>

namespace epcag {

/// Dense output of one interval [theta_i, theta_{i+1}]: RK nodes plus the
/// right-hand side at each node, evaluated through cubic Hermite interpolation.
struct Segment {
  long interval = 0;
  std::vector<double> times;   ///< strictly increasing
  std::vector<Vector> states;
  std::vector<Vector> slopes;  ///< z'(t_j) on this interval's branch

  double t_front() const { return times.front(); }
  double t_back() const { return times.back(); }
  const Vector& front() const { return states.front(); }
  const Vector& back() const { return states.back(); }

  /// Hermite interpolation; t is clamped to the segment.
  Vector at(double t) const;
  /// Largest ||z(t_j)|| over the nodes.
  double max_norm() const;
};

enum class Direction { forward, backward };

/// Per-interval diagnostics of the anchor solve.
struct IntervalReport {
  long interval = 0;
  int iterations = 0;
  double last_delta = 0.0;
  std::vector<double> deltas;
  std::vector<double> ratios;
  bool contracted = true;    ///< plain fixed-point iteration converged
  bool non_unique = false;   ///< contraction ratio exceeded 1 at some iterate
  std::vector<Vector> alternate_anchors;  ///< other anchor values found
  double anchor_mismatch = 0.0;           ///< ||z(zeta_i) - anchor||
};

/// Piecewise-smooth solution assembled from interval segments.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(Direction direction) : direction_(direction) {}

  Direction direction() const noexcept { return direction_; }
  bool empty() const noexcept { return segments_.empty(); }
  int dim() const { return static_cast<int>(segments_.front().states.front().size()); }

  /// Segments are kept sorted by interval index.
  void add(Segment segment, Vector anchor, IntervalReport report);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const std::map<long, Vector>& anchors() const noexcept { return anchors_; }
  const std::vector<IntervalReport>& reports() const noexcept { return reports_; }

  double t_min() const { return segments_.front().t_front(); }
  double t_max() const { return segments_.back().t_back(); }

  /// Evaluates z(t); at a shared breakpoint the right-hand segment is used.
  Vector at(double t) const;

  /// Any interval flagged non-unique.
  bool non_unique() const;

  /// Largest jump between adjacent segments at shared breakpoints.
  double continuity_defect() const;

  /// Largest ||anchor_i - z(zeta_i)|| using the segment of interval i.
  double anchor_defect(const std::vector<double>& zetas_by_interval, long i_min) const;

 private:
  Direction direction_ = Direction::forward;
  std::vector<Segment> segments_;
  std::map<long, Vector> anchors_;
  std::vector<IntervalReport> reports_;
};

}  // namespace epcag
