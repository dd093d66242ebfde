#pragma once

#include "epcag/manifolds.hpp"
#include "epcag/solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace epcag {

/// G(t, v) as consumed by the reduced system.
using CentreMap = std::function<Vector(double t, const Vector& v)>;

/// v' = B_minus v + f_minus(t, (G(t,v), v), (G(beta, vbar), vbar)), declared
/// Lipschitz constant l (1 + P l). Throws DegenerateDimensionError when the
/// split has no centre directions.
HybridSystem build_reduced(const ManifoldBuilder& builder, CentreMap g, double P);

struct PhaseOptions {
  double tol = 1e-9;
  int max_iter = 50;
  /// Forward window for the decay report; <= 0 selects 10 theta.
  double span = 0.0;
  int samples = 201;
  SolverOptions solver{};
  /// Lipschitz constant of G used in the assumption check (empirical P).
  double P = 0.0;
};

struct PhaseResult {
  Vector d_star;
  Vector X0;                          ///< u0 - G(zeta, d_star)
  int iterations = 0;
  std::vector<double> ball_distances; ///< ||d_j - v0|| per iterate
  double ball_radius = 0.0;           ///< ||u0 - G(zeta, v0)||
  Trajectory solution;
  Trajectory companion;               ///< starts on the centre surface
  std::vector<double> times;
  std::vector<double> weighted;       ///< ||z - mu|| e^{alpha (t - zeta)}
  double max_weighted = 0.0;
  double bound = 0.0;                 ///< K (1 + 2pl) ||X0|| * 1.1
  bool bounded = false;
  /// 1 - pPKl^2 > 0 and pKl(1 + Pl) <= 1.
  bool assumptions_hold = false;
};

/// Finds the companion solution on the centre surface that z(t, zeta, z0)
/// approaches. Throws ContractionFailureError when an iterate leaves the ball
/// ||d - v0|| <= ||u0 - G(zeta, v0)|| or the iteration does not settle.
PhaseResult asymptotic_phase(const ManifoldBuilder& builder, double zeta, const Vector& z0,
                             const PhaseOptions& options);

enum class Stability { unstable, stable, asymptotic, exponential };

std::string to_string(Stability s);

/// Exponential counts as asymptotic.
Stability coarse(Stability s);

struct StabilityOptions {
  std::vector<double> radii{0.1, 0.01, 0.001};
  /// <= 0 selects 20 theta.
  double horizon = 0.0;
  /// Empty selects five consecutive zeta_i from the interval holding 0 (or
  /// the first interval).
  std::vector<double> t0_samples;
  int random_dirs = 8;
  std::uint64_t seed = 1;
  double escape_factor = 10.0;
  double bound_factor = 3.0;
  double decay_factor = 0.01;
  double fit_r2 = 0.98;
  SolverOptions solver{.step = 0.05};
};

struct StabilityEvidence {
  double t0 = 0.0;
  double radius = 0.0;
  double max_excursion = 0.0;
  double final_norm = 0.0;
  double horizon = 0.0;
  bool blew_up = false;
  bool sustained_decay = false;
  double fit_rate = 0.0;
  double fit_r2 = 0.0;
};

struct StabilityVerdict {
  Stability classification = Stability::stable;
  std::optional<double> rate;
  std::vector<StabilityEvidence> evidence;
  std::vector<double> t0_sweep;
};

/// Sampled Lyapunov classification of the trivial solution from a star of
/// starts on spheres ||z0|| = delta. Blow-up counts as unstable evidence.
StabilityVerdict classify_stability(const HybridSystem& sys, const ArgumentSchedule& sched,
                                    const StabilityOptions& options);

struct ReductionResult {
  StabilityVerdict full;
  StabilityVerdict reduced;
  bool agree = false;
};

/// Classifies the full system and its restriction to the centre surface with
/// the same options.
ReductionResult reduction_check(const ManifoldBuilder& builder, CentreMap g, double P,
                                const StabilityOptions& options);

}  // namespace epcag
