#include "epcag/system.hpp"

#include "epcag/errors.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace epcag {

HybridSystem::HybridSystem(Matrix a, Nonlinearity f, double lipschitz, SystemOptions options)
    : HybridSystem(std::move(a),
                   AnchoredNonlinearity([g = std::move(f)](double t, double, const Vector& z,
                                                           const Vector& w) { return g(t, z, w); }),
                   lipschitz, std::move(options)) {}

HybridSystem::HybridSystem(Matrix a, AnchoredNonlinearity f, double lipschitz,
                           SystemOptions options)
    : a_(std::move(a)), f_(std::move(f)), l_(lipschitz), options_(std::move(options)) {
  if (a_.rows() == 0 || a_.rows() != a_.cols()) {
    throw ValidationError("solver", "system matrix must be square and non-empty");
  }
  if (!a_.allFinite()) throw ValidationError("solver", "system matrix has non-finite entries");
  if (!(l_ >= 0.0) || !std::isfinite(l_)) {
    throw ValidationError("solver", "Lipschitz constant must be finite and non-negative");
  }
  if (!f_) throw ValidationError("solver", "nonlinearity is empty");
  if (options_.validate) validate();
}

SystemProbe HybridSystem::probe(int probes, std::uint64_t seed, double radius) const {
  SystemProbe out;
  const int n = dim();
  const Vector zero = Vector::Zero(n);

  constexpr int kGrid = 21;
  for (int k = 0; k < kGrid; ++k) {
    const double t = options_.t_lo + (options_.t_hi - options_.t_lo) * k / (kGrid - 1);
    out.max_origin_residual = std::max(out.max_origin_residual, f_(t, t, zero, zero).norm());
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-radius, radius);
  std::uniform_real_distribution<double> tdist(options_.t_lo, options_.t_hi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Vector& v) {
    for (int i = 0; i < n; ++i) v(i) = box(rng);
  };
  Vector z1(n), z2(n), w1(n), w2(n);
  for (int p = 0; p < probes; ++p) {
    const double t = tdist(rng);
    draw(z1);
    draw(w1);
    if (p % 2 == 0) {
      draw(z2);
      draw(w2);
    } else {
      // Nearby pairs pick up local slopes.
      const double h = 1e-3 * radius;
      z2 = z1;
      w2 = w1;
      for (int i = 0; i < n; ++i) {
        z2(i) += h * gauss(rng);
        w2(i) += h * gauss(rng);
      }
    }
    const double den = (z1 - z2).norm() + (w1 - w2).norm();
    if (den == 0.0) continue;
    const double num = (f_(t, t, z1, w1) - f_(t, t, z2, w2)).norm();
    out.max_lipschitz_ratio = std::max(out.max_lipschitz_ratio, num / den);
  }
  return out;
}

void HybridSystem::validate() {
  const auto pr = probe(options_.probes, options_.seed, options_.probe_radius);
  if (pr.max_origin_residual > 1e-12) {
    std::ostringstream os;
    os << "nonlinearity does not vanish at the origin (residual " << pr.max_origin_residual << ")";
    throw ValidationError("solver", os.str());
  }
  if (pr.max_lipschitz_ratio > l_ * (1.0 + 1e-6) + 1e-12) {
    std::ostringstream os;
    os << "sampled Lipschitz ratio " << pr.max_lipschitz_ratio
       << " exceeds the declared constant " << l_;
    throw ValidationError("solver", os.str());
  }
}

}  // namespace epcag
