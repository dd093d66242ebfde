#pragma once

#include "epcag/analysis.hpp"
#include "epcag/schedule.hpp"
#include "epcag/solver.hpp"
#include "epcag/system.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace epcag {

enum class ManifoldKind { stable, centre };
enum class PicardStart { zero, linear };

/// The decay exponent alpha is taken from the ConstantsBundle.
struct ManifoldOptions {
  /// Truncation length of the improper integrals; <= 0 selects the default
  /// (1/sigma) ln(K/tol) for F and (1/kappa_bar) ln(K_bar/tol) for G.
  double horizon = 0.0;
  double tol = 1e-10;
  int max_iter = 200;
  /// Grid step of the Picard quadrature.
  double step = 0.01;
  PicardStart init = PicardStart::zero;
  /// Exponential shift for G; <= 0 selects sigma / 2.
  double kappa = 0.0;
  /// kappa_bar = kappa_ratio * kappa.
  double kappa_ratio = 0.9;
};

/// Constants of the exponentially shifted system used for G.
struct ShiftedConstants {
  double kappa = 0.0;
  double kappa_bar = 0.0;
  double K_bar = 1.0;
  double alpha1 = 0.0;        ///< kappa_bar / 2
  double alpha_tilde = 0.0;   ///< kappa - alpha1, backward decay of on-S0 solutions
  double D = 2.0;             ///< 2 K_bar
  double l_bar = 0.0;         ///< l e^{kappa theta} (block coordinates)
  double p_bar = 0.0;
  double two_p_l_bar = 0.0;
  bool smallness_pass = false;
  double P_analytic = 0.0;    ///< p_bar K_bar e^{kappa theta}
};

struct ManifoldApprox {
  ManifoldKind kind = ManifoldKind::stable;
  double anchor_time = 0.0;
  double horizon = 0.0;
  int iterates = 0;
  double lipschitz_bound = 0.0;  ///< pKl for F, P l for G
  double last_delta = 0.0;
  std::vector<double> deltas;
  Vector value;                  ///< F(t0, c) or G(t0, d)
  /// Solution samples in block coordinates (u, v).
  std::vector<double> times;
  std::vector<Vector> states;
  /// Largest ||y(t)|| / envelope(t) over the half-line the envelope covers.
  double envelope_ratio = 0.0;
  bool envelope_ok = true;
};

/// Evaluates the graph maps F (stable surface) and G (centre surface) for a
/// fixed system. Holds references to `sys` and `sched`; both must outlive it.
class ManifoldBuilder {
 public:
  ManifoldBuilder(const HybridSystem& sys, const ArgumentSchedule& sched, SpectralSplit split,
                  ConstantsBundle bundle, ManifoldOptions options = {});

  const HybridSystem& system() const noexcept { return sys_; }
  const ArgumentSchedule& schedule() const noexcept { return sched_; }
  const SpectralSplit& split() const noexcept { return split_; }
  const ConstantsBundle& bundle() const noexcept { return bundle_; }
  const ManifoldOptions& options() const noexcept { return options_; }
  const ShiftedConstants& shifted() const noexcept { return shifted_; }

  double horizon_F() const;
  double horizon_G() const;

  /// T f(t, S y, S ybar): the nonlinearity in block coordinates.
  Vector block_f(double t, double anchor_time, const Vector& y, const Vector& ybar) const;

  /// v-value of the stable surface over u = c at time t0. Throws
  /// SmallnessError when 2pl >= 1 and DivergenceError on failed iteration.
  ManifoldApprox eval_F(double t0, const Vector& c) const;
  ManifoldApprox eval_F(double t0, const Vector& c, const ManifoldOptions& options) const;

  /// u-value of the centre surface over v = d at time t0.
  ManifoldApprox eval_G(double t0, const Vector& d) const;
  ManifoldApprox eval_G(double t0, const Vector& d, const ManifoldOptions& options) const;

  /// Stable graph map of z' = A z + Q(t, z, z(beta)) where Q is a caller
  /// supplied nonlinearity already in block coordinates (used for the
  /// translated system of the asymptotic phase).
  ManifoldApprox eval_F_with(const std::function<Vector(double, double, const Vector&,
                                                        const Vector&)>& q,
                             double t0, const Vector& c, const ManifoldOptions& options) const;

  /// Bound on |F_H(t0,c) - F_infinity(t0,c)| from truncating at horizon H.
  double tail_bound(double horizon, double c_norm) const;

 private:
  const HybridSystem& sys_;
  const ArgumentSchedule& sched_;
  SpectralSplit split_;
  ConstantsBundle bundle_;
  ManifoldOptions options_;
  ShiftedConstants shifted_;
};

ShiftedConstants shifted_constants(const SpectralSplit& split, const ConstantsBundle& bundle,
                                   double kappa, double kappa_ratio);

/// Sampled max ||G(t0,d1) - G(t0,d2)|| / (l ||d1 - d2||) over random pairs in
/// the ball of radius `radius`, inflated by 10%.
double estimate_P(const ManifoldBuilder& builder, double t0, int pairs, std::uint64_t seed,
                  double radius);

struct InvarianceReport {
  std::vector<double> zetas;
  std::vector<double> defects;      ///< ||v(zeta_j) - F(zeta_j, u(zeta_j))||
  double max_defect = 0.0;
  std::vector<double> off_times;
  std::vector<double> off_v_norms;  ///< ||v(t)|| of the perturbed start
  std::vector<double> on_v_norms;   ///< ||v(t)|| of the on-surface start
  double off_min_v = 0.0;
};

/// Starts on the stable surface at (zeta_i, (c, F(zeta_i, c))), follows the
/// solution across `span` later anchors and measures the distance to the
/// surface there; also follows a start with v shifted by `delta_off`.
InvarianceReport verify_surface_invariance(const ManifoldBuilder& builder, long i,
                                           const Vector& c, int span,
                                           const SolverOptions& solver, double delta_off = 0.1);

struct GCacheOptions {
  /// v-coordinates covered are [-box, box]^{n-k}.
  double box = 1.5;
  /// Nodes per v-axis (odd; symmetric geometric spacing around 0).
  int v_nodes = 21;
  /// Smallest positive node as a fraction of the box.
  double inner = 1e-3;
  /// Uniform t-nodes per interval (zeta_i is added).
  int t_nodes = 5;
  /// Reuse one interval's table on periodic schedules with autonomous f.
  bool use_periodicity = true;
};

/// Tabulated G with multilinear interpolation, built lazily per interval.
/// Safe to call from several threads.
class GCache {
 public:
  GCache(const ManifoldBuilder& builder, GCacheOptions options = {});

  /// Throws BoxExceededError outside the v-box.
  Vector operator()(double t, const Vector& v) const;

  const GCacheOptions& options() const noexcept { return options_; }
  std::size_t tables_built() const;
  const std::vector<double>& axis() const noexcept { return axis_; }

 private:
  struct Table {
    std::vector<double> times;
    std::vector<std::vector<Vector>> values;  // [t-node][flattened v-node]
  };
  const Table& table_for(long interval) const;
  Table build(long interval) const;

  const ManifoldBuilder& builder_;
  GCacheOptions options_;
  std::vector<double> axis_;
  int vdim_ = 0;
  bool periodic_ = false;
  long representative_ = 0;
  mutable std::mutex mutex_;
  mutable std::map<long, std::shared_ptr<const Table>> tables_;
};

}  // namespace epcag
