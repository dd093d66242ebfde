#pragma once

// Closed forms used as independent references. Nothing here calls into the
// library's integrators.

#include <cmath>
#include <vector>

namespace oracle {

// Scalar z' = a z + b z(zeta) on one interval: the solution through the
// anchor value w = z(zeta).
inline double linear_from_anchor(double a, double b, double zeta, double w, double t) {
  const double e = std::exp(a * (t - zeta));
  return e * w + (b / a) * (e - 1.0) * w;
}

// Anchor value reached from the datum z(t0) = z0 on the interval anchored at zeta.
inline double linear_anchor(double a, double b, double zeta, double t0, double z0) {
  const double e = std::exp(a * (t0 - zeta));
  return z0 / (e + (b / a) * (e - 1.0));
}

// Walks z' = a z + b z(beta) forward through the breakpoints `thetas` with
// anchors `zetas` (zetas[i] in [thetas[i], thetas[i+1]]), starting at thetas[0].
struct LinearMarch {
  double a, b;
  std::vector<double> thetas, zetas;
  double z0;

  double at(double t) const {
    double z = z0;
    for (std::size_t i = 0; i + 1 < thetas.size(); ++i) {
      const double w = linear_anchor(a, b, zetas[i], thetas[i], z);
      if (t <= thetas[i + 1]) return linear_from_anchor(a, b, zetas[i], w, t);
      z = linear_from_anchor(a, b, zetas[i], w, thetas[i + 1]);
    }
    return z;
  }
};

// z' = 3 z - z(0)^2 on [-1, 1] through z(0) = z: value at t.
inline double example1_at(double z, double t) {
  const double e = std::exp(3.0 * t);
  return e * z - z * z / 3.0 * (e - 1.0);
}

// z0 + z1 for which both anchors land on the same value at t = 1.
inline double example1_collision_sum() {
  const double E = std::exp(3.0);
  return 3.0 * E / (E - 1.0);
}

// Below this datum at t = -1 no anchor value on [-1, 1) exists.
inline double example1_forward_threshold() {
  const double E = std::exp(3.0);
  return -3.0 / (4.0 * E * (E - 1.0));
}

}  // namespace oracle
