#pragma once

#include "epcag/linalg.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace epcag {

/// f(t, z, w) with w standing for the anchored state z(beta(t)).
using Nonlinearity = std::function<Vector(double t, const Vector& z, const Vector& w)>;

/// Variant that also receives the anchor time beta(t). Needed by derived
/// systems (time-weighted shifts, reduced systems) whose right-hand side
/// depends on where the anchored value was taken.
using AnchoredNonlinearity =
    std::function<Vector(double t, double anchor_time, const Vector& z, const Vector& w)>;

struct SystemOptions {
  /// Run the origin and Lipschitz spot checks at construction.
  bool validate = true;
  /// Radius of the box the Lipschitz probe samples from.
  double probe_radius = 1.0;
  int probes = 200;
  std::uint64_t seed = 0x5eed;
  /// t-range sampled by the spot checks.
  double t_lo = -10.0;
  double t_hi = 10.0;
  /// f does not depend on t (and not on the anchor time).
  bool autonomous = false;
  std::string name;
};

struct SystemProbe {
  double max_origin_residual = 0.0;  ///< max ||f(t,0,0)|| over the t-grid
  double max_lipschitz_ratio = 0.0;  ///< max sampled difference quotient
};

/// z' = A z + f(t, z(t), z(beta(t))) with f Lipschitz in (z, w) with constant l.
class HybridSystem {
 public:
  HybridSystem(Matrix a, Nonlinearity f, double lipschitz, SystemOptions options = {});
  HybridSystem(Matrix a, AnchoredNonlinearity f, double lipschitz,
               SystemOptions options = {});

  int dim() const noexcept { return static_cast<int>(a_.rows()); }
  const Matrix& a() const noexcept { return a_; }
  double lipschitz() const noexcept { return l_; }
  bool autonomous() const noexcept { return options_.autonomous; }
  const std::string& name() const noexcept { return options_.name; }
  const SystemOptions& options() const noexcept { return options_; }

  Vector nonlinearity(double t, double anchor_time, const Vector& z, const Vector& w) const {
    return f_(t, anchor_time, z, w);
  }

  /// A z + f(t, z, w).
  Vector rhs(double t, double anchor_time, const Vector& z, const Vector& w) const {
    Vector out = f_(t, anchor_time, z, w);
    out.noalias() += a_ * z;
    return out;
  }

  /// Monte-Carlo estimates of the origin residual and the Lipschitz ratio.
  SystemProbe probe(int probes, std::uint64_t seed, double radius) const;

  const AnchoredNonlinearity& map() const noexcept { return f_; }

 private:
  void validate();

  Matrix a_;
  AnchoredNonlinearity f_;
  double l_;
  SystemOptions options_;
};

}  // namespace epcag
