#include "epcag/schedule.hpp"

#include "epcag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace epcag {

ArgumentSchedule::ArgumentSchedule(long i_min, std::vector<double> thetas,
                                   std::vector<double> zetas, double theta_bound)
    : i_min_(i_min), thetas_(std::move(thetas)), zetas_(std::move(zetas)) {
  if (thetas_.size() < 2) {
    throw ValidationError("schedule", "schedule needs at least two endpoints");
  }
  if (zetas_.size() + 1 != thetas_.size()) {
    std::ostringstream os;
    os << "expected " << thetas_.size() - 1 << " anchors for " << thetas_.size()
       << " endpoints, got " << zetas_.size();
    throw ValidationError("schedule", os.str());
  }
  double max_gap = 0.0;
  for (std::size_t k = 0; k + 1 < thetas_.size(); ++k) {
    const long idx = i_min_ + static_cast<long>(k);
    if (!std::isfinite(thetas_[k]) || !std::isfinite(zetas_[k]) ||
        !std::isfinite(thetas_[k + 1])) {
      throw ValidationError("schedule", "non-finite schedule entry at index " +
                                            std::to_string(idx), idx);
    }
    if (!(thetas_[k] < thetas_[k + 1])) {
      throw ValidationError("schedule", "theta not strictly increasing at index " +
                                            std::to_string(idx), idx);
    }
    if (zetas_[k] < thetas_[k] || zetas_[k] > thetas_[k + 1]) {
      throw ValidationError("schedule", "zeta outside [theta_i, theta_{i+1}] at index " +
                                            std::to_string(idx), idx);
    }
    max_gap = std::max(max_gap, thetas_[k + 1] - thetas_[k]);
  }
  if (theta_bound <= 0.0) {
    theta_bound_ = max_gap;
  } else {
    if (max_gap > theta_bound) {
      throw ValidationError("schedule", "gap exceeds theta_bound");
    }
    theta_bound_ = theta_bound;
  }
}

double ArgumentSchedule::theta(long i) const {
  if (i < i_min_ || i > i_max()) {
    throw WindowError("theta index " + std::to_string(i) + " outside window [" +
                          std::to_string(i_min_) + ", " + std::to_string(i_max()) + "]",
                      t_min(), t_max());
  }
  return thetas_[static_cast<std::size_t>(i - i_min_)];
}

double ArgumentSchedule::zeta(long i) const {
  if (i < i_min_ || i >= i_max()) {
    throw WindowError("zeta index " + std::to_string(i) + " outside window [" +
                          std::to_string(i_min_) + ", " + std::to_string(i_max() - 1) + "]",
                      t_min(), t_max());
  }
  return zetas_[static_cast<std::size_t>(i - i_min_)];
}

void ArgumentSchedule::check_window(double t) const {
  if (!(t >= t_min() && t <= t_max())) {
    std::ostringstream os;
    os << "t = " << t << " outside schedule window [" << t_min() << ", " << t_max() << "]";
    throw WindowError(os.str(), t_min(), t_max());
  }
}

long ArgumentSchedule::interval_index(double t) const {
  check_window(t);
  auto it = std::upper_bound(thetas_.begin(), thetas_.end(), t);
  auto k = static_cast<long>(it - thetas_.begin()) - 1;
  k = std::min(k, static_cast<long>(zetas_.size()) - 1);
  return i_min_ + k;
}

long ArgumentSchedule::interval_index_left(double t) const {
  check_window(t);
  auto it = std::lower_bound(thetas_.begin(), thetas_.end(), t);
  auto k = static_cast<long>(it - thetas_.begin()) - 1;
  k = std::max(k, 0L);
  return i_min_ + k;
}

double ArgumentSchedule::beta(double t) const { return zeta(interval_index(t)); }

bool ArgumentSchedule::is_periodic(double rel_tol) const {
  const double gap0 = thetas_[1] - thetas_[0];
  const double off0 = zetas_[0] - thetas_[0];
  const double scale = std::max(1.0, std::abs(thetas_.back()) + std::abs(thetas_.front()));
  for (std::size_t k = 0; k < zetas_.size(); ++k) {
    const double gap = thetas_[k + 1] - thetas_[k];
    const double off = zetas_[k] - thetas_[k];
    if (std::abs(gap - gap0) > rel_tol * scale || std::abs(off - off0) > rel_tol * scale) {
      return false;
    }
  }
  return true;
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "epca") return ScheduleKind::epca;
  if (name == "alternating") return ScheduleKind::alternating;
  if (name == "explicit") return ScheduleKind::explicit_arrays;
  if (name == "randomized") return ScheduleKind::randomized;
  throw ValidationError("schedule", "unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::epca: return "epca";
    case ScheduleKind::alternating: return "alternating";
    case ScheduleKind::explicit_arrays: return "explicit";
    case ScheduleKind::randomized: return "randomized";
  }
  return "unknown";
}

ArgumentSchedule make_schedule(ScheduleKind kind, const ScheduleParams& params) {
  if (kind != ScheduleKind::explicit_arrays && params.i_max <= params.i_min) {
    throw ValidationError("schedule", "window needs i_max > i_min");
  }
  const auto count = static_cast<std::size_t>(params.i_max - params.i_min);
  std::vector<double> thetas;
  std::vector<double> zetas;
  thetas.reserve(count + 1);
  zetas.reserve(count);

  switch (kind) {
    case ScheduleKind::epca:
      for (long i = params.i_min; i <= params.i_max; ++i) thetas.push_back(static_cast<double>(i));
      for (long i = params.i_min; i < params.i_max; ++i) zetas.push_back(static_cast<double>(i));
      return ArgumentSchedule(params.i_min, std::move(thetas), std::move(zetas), 1.0);

    case ScheduleKind::alternating:
      for (long i = params.i_min; i <= params.i_max; ++i) thetas.push_back(2.0 * i - 1.0);
      for (long i = params.i_min; i < params.i_max; ++i) zetas.push_back(2.0 * i);
      return ArgumentSchedule(params.i_min, std::move(thetas), std::move(zetas), 2.0);

    case ScheduleKind::explicit_arrays:
      // theta bound of an explicit schedule is its largest gap
      return ArgumentSchedule(params.i_min, params.thetas, params.zetas, 0.0);

    case ScheduleKind::randomized: {
      if (!(params.theta_bound > 0.0)) {
        throw ValidationError("schedule", "randomized schedule needs theta_bound > 0");
      }
      std::mt19937_64 rng(params.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double th = params.theta_bound;
      double t = params.origin;
      thetas.push_back(t);
      for (std::size_t k = 0; k < count; ++k) {
        // 1 - u lies in (0, 1], so the gap lies in (th/4, th].
        const double gap = th * (0.25 + 0.75 * (1.0 - unit(rng)));
        const double next = t + gap;
        const double z = t + unit(rng) * gap;
        zetas.push_back(std::min(z, next));
        thetas.push_back(next);
        t = next;
      }
      return ArgumentSchedule(params.i_min, std::move(thetas), std::move(zetas), th);
    }
  }
  throw ValidationError("schedule", "unhandled schedule kind");
}

}  // namespace epcag
