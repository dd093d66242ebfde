#include "epcag/trajectory.hpp"

#include "epcag/errors.hpp"

#include <algorithm>

namespace epcag {

Vector Segment::at(double t) const {
  if (times.size() == 1) return states.front();
  t = std::clamp(t, times.front(), times.back());
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times.begin());
  k = std::clamp<std::size_t>(k, 1, times.size() - 1) - 1;
  const double t0 = times[k];
  const double h = times[k + 1] - t0;
  const double s = (t - t0) / h;
  if (s == 0.0) return states[k];
  if (s == 1.0) return states[k + 1];
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * states[k] + (h10 * h) * slopes[k] + h01 * states[k + 1] + (h11 * h) * slopes[k + 1];
}

double Segment::max_norm() const {
  double m = 0.0;
  for (const auto& z : states) m = std::max(m, z.norm());
  return m;
}

void Trajectory::add(Segment segment, Vector anchor, IntervalReport report) {
  const long i = segment.interval;
  auto pos = std::lower_bound(segments_.begin(), segments_.end(), i,
                              [](const Segment& s, long idx) { return s.interval < idx; });
  if (pos != segments_.end() && pos->interval == i) {
    throw ValidationError("solver", "duplicate segment for interval " + std::to_string(i));
  }
  const auto offset = pos - segments_.begin();
  segments_.insert(pos, std::move(segment));
  reports_.insert(reports_.begin() + offset, std::move(report));
  anchors_[i] = std::move(anchor);
}

Vector Trajectory::at(double t) const {
  if (segments_.empty()) throw ValidationError("solver", "empty trajectory");
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double v, const Segment& s) { return v < s.t_front(); });
  if (it == segments_.begin()) return segments_.front().at(t);
  return std::prev(it)->at(t);
}

bool Trajectory::non_unique() const {
  return std::any_of(reports_.begin(), reports_.end(),
                     [](const IntervalReport& r) { return r.non_unique; });
}

double Trajectory::continuity_defect() const {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < segments_.size(); ++k) {
    worst = std::max(worst, (segments_[k].back() - segments_[k + 1].front()).norm());
  }
  return worst;
}

double Trajectory::anchor_defect(const std::vector<double>& zetas_by_interval, long i_min) const {
  double worst = 0.0;
  for (const auto& seg : segments_) {
    const auto idx = static_cast<std::size_t>(seg.interval - i_min);
    const auto& anchor = anchors_.at(seg.interval);
    worst = std::max(worst, (seg.at(zetas_by_interval.at(idx)) - anchor).norm());
  }
  return worst;
}

}  // namespace epcag
