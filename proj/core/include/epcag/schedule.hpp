#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace epcag {

/// The interval endpoints theta_i and argument anchors zeta_i of a piecewise
/// constant argument over a finite index window [i_min, i_max].
///
/// There are i_max - i_min + 1 endpoints and one anchor per interval
/// [theta_i, theta_{i+1}), i.e. anchors are indexed i_min .. i_max - 1. The
/// deviating argument is beta(t) = zeta_i for t in [theta_i, theta_{i+1}).
///
/// Immutable after construction.
class ArgumentSchedule {
 public:
  /// Validates the ordering invariants and throws ValidationError naming the
  /// first violated index. `theta_bound` <= 0 means "use the largest gap".
  ArgumentSchedule(long i_min, std::vector<double> thetas, std::vector<double> zetas,
                   double theta_bound = 0.0);

  long i_min() const noexcept { return i_min_; }
  long i_max() const noexcept { return i_min_ + static_cast<long>(thetas_.size()) - 1; }
  /// Number of intervals in the window.
  long intervals() const noexcept { return static_cast<long>(zetas_.size()); }
  double theta_bound() const noexcept { return theta_bound_; }

  double theta(long i) const;
  double zeta(long i) const;
  double t_min() const noexcept { return thetas_.front(); }
  double t_max() const noexcept { return thetas_.back(); }

  const std::vector<double>& thetas() const noexcept { return thetas_; }
  const std::vector<double>& zetas() const noexcept { return zetas_; }

  /// i with theta_i <= t < theta_{i+1}; t == theta_{i_max} maps to i_max - 1.
  long interval_index(double t) const;

  /// Right-closed variant used when marching backward: i with
  /// theta_i < t <= theta_{i+1}; t == theta_{i_min} maps to i_min.
  long interval_index_left(double t) const;

  /// zeta_{interval_index(t)}.
  double beta(double t) const;

  /// True when all gaps and all offsets zeta_i - theta_i coincide, so the
  /// schedule is invariant under a shift by one gap.
  bool is_periodic(double rel_tol = 1e-12) const;

 private:
  void check_window(double t) const;

  long i_min_;
  std::vector<double> thetas_;
  std::vector<double> zetas_;
  double theta_bound_;
};

enum class ScheduleKind { epca, alternating, explicit_arrays, randomized };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

struct ScheduleParams {
  long i_min = 0;
  long i_max = 10;
  // explicit_arrays
  std::vector<double> thetas;
  std::vector<double> zetas;
  // randomized
  double theta_bound = 1.0;
  double origin = 0.0;
  std::uint64_t seed = 0;
};

/// Builds a schedule of the requested kind.
///
///  - epca:        theta_i = zeta_i = i (greatest-integer argument)
///  - alternating: theta_i = 2i - 1, zeta_i = 2i (alternately retarded/advanced)
///  - explicit_arrays: caller-supplied sequences starting at index i_min
///  - randomized:  theta_{i_min} = origin, gaps uniform in (theta/4, theta],
///                 zeta_i uniform in [theta_i, theta_{i+1}], from `seed`
ArgumentSchedule make_schedule(ScheduleKind kind, const ScheduleParams& params);

}  // namespace epcag
