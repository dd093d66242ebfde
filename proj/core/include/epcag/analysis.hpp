#pragma once

#include "epcag/linalg.hpp"
#include "epcag/schedule.hpp"
#include "epcag/system.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace epcag {

struct SplitOptions {
  /// Eigenvalues with |Re| <= tol_eig count as centre eigenvalues.
  double tol_eig = 1e-9;
  /// Decay exponent; <= 0 selects |mu| / 2.
  double sigma = 0.0;
  /// Right end of the sampling grid for K.
  double t_check = 40.0;
  int grid = 400;
  double inflation = 1.1;
  double cond_max = 1e8;
};

/// Real block-diagonalisation T A T^{-1} = diag(B_plus, B_minus), stable block first.
struct SpectralSplit {
  int n = 0;
  int k = 0;                 ///< stable dimension
  Matrix transform;          ///< T, maps original coordinates to block coordinates
  Matrix transform_inv;      ///< T^{-1} = [V_stable V_centre]
  Matrix b_plus;             ///< k x k
  Matrix b_minus;            ///< (n-k) x (n-k)
  double mu = 0.0;           ///< largest Re over the stable block, -inf when k = 0
  double sigma = 1.0;
  double k_const = 1.0;      ///< K
  int m_pow = 0;             ///< polynomial power of ||e^{-B_minus t}||
  double transform_cond = 1.0;
  double reconstruction_error = 0.0;  ///< ||T^{-1} diag(B+,B-) T - A||_F
  std::vector<std::complex<double>> eigenvalues;

  Vector to_blocks(const Vector& z) const { return transform * z; }
  Vector from_blocks(const Vector& y) const { return transform_inv * y; }
  Vector u_part(const Vector& y) const { return y.head(k); }
  Vector v_part(const Vector& y) const { return y.tail(n - k); }
  Vector join(const Vector& u, const Vector& v) const;
};

/// Throws PositiveSpectrumError for Re lambda > tol_eig and ConditioningError
/// when the transform is ill-conditioned.
SpectralSplit spectral_split(const Matrix& a, const SplitOptions& options = {});

/// Largest sampled ||e^{B_plus t}|| e^{sigma t} and ||e^{-B_minus t}|| / (1 + t^m).
struct GrowthSample {
  double stable_ratio = 0.0;
  double centre_ratio = 0.0;
};
GrowthSample sample_growth(const SpectralSplit& split, double t_check, int grid);

struct ConstantsBundle {
  double omega = 0.0;
  double M_up = 1.0;
  double m_low = 1.0;
  double theta = 0.0;
  double l = 0.0;
  /// l scaled by ||T|| ||T^{-1}||: the Lipschitz constant in block coordinates.
  double l_block = 0.0;
  double alpha = 0.0;
  double sigma = 0.0;
  double K = 1.0;
  int m_pow = 0;
  double gamma = 0.0;
  double p_const = 0.0;
  /// Left-hand sides and right-hand sides of the three (C5) inequalities.
  std::array<double, 3> c5_lhs{};
  std::array<double, 3> c5_rhs{};
  std::array<bool, 3> c5_pass{};
  /// Passing with less than 10% margin.
  std::array<bool, 3> c5_near_boundary{};
  double two_p_l = 0.0;
  bool c10_pass = false;

  bool c5_all() const { return c5_pass[0] && c5_pass[1] && c5_pass[2]; }
  /// Contraction bound 2 M l theta of the anchor iteration.
  double anchor_ratio_bound() const { return 2.0 * M_up * l * theta; }
};

/// gamma = \int_0^\infty (1 + t^m) e^{-alpha t} dt = 1/alpha + m!/alpha^{m+1}.
double gamma_closed_form(double alpha, int m_pow);

/// Throws ParameterError unless 0 < alpha < split.sigma.
ConstantsBundle compute_constants(const Matrix& a, const SpectralSplit& split,
                                  const ArgumentSchedule& sched, double l, double alpha);

struct ConditionEntry {
  std::string id;      ///< "C1" .. "C7", "10"
  bool pass = false;
  bool near_boundary = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  bool all_pass() const;
  const ConditionEntry& at(const std::string& id) const;
  /// Fixed-width text table.
  std::string table() const;
};

ConditionReport check_conditions(const HybridSystem& sys, const ArgumentSchedule& sched,
                                 const SpectralSplit& split, const ConstantsBundle& bundle,
                                 int probes, std::uint64_t seed, double tol_eig = 1e-9);

}  // namespace epcag
