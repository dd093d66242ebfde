#include "epcag/manifolds.hpp"

#include "epcag/errors.hpp"
#include "picard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace epcag {
namespace {

detail::PicardInit to_detail(PicardStart s) {
  return s == PicardStart::linear ? detail::PicardInit::linear : detail::PicardInit::zero;
}

// Smallest theta_j >= t.
double theta_at_or_after(const ArgumentSchedule& sched, double t) {
  if (t > sched.t_max()) {
    std::ostringstream os;
    os << "truncation point " << t << " beyond schedule window [" << sched.t_min() << ", "
       << sched.t_max() << "]";
    throw WindowError(os.str(), sched.t_min(), sched.t_max());
  }
  const long j = sched.interval_index(t);
  return sched.theta(j) >= t ? sched.theta(j) : sched.theta(j + 1);
}

// Largest theta_j <= t.
double theta_at_or_before(const ArgumentSchedule& sched, double t) {
  if (t < sched.t_min()) {
    std::ostringstream os;
    os << "truncation point " << t << " before schedule window [" << sched.t_min() << ", "
       << sched.t_max() << "]";
    throw WindowError(os.str(), sched.t_min(), sched.t_max());
  }
  return sched.theta(sched.interval_index(t));
}

}  // namespace

ShiftedConstants shifted_constants(const SpectralSplit& split, const ConstantsBundle& bundle,
                                   double kappa, double kappa_ratio) {
  ShiftedConstants s;
  s.kappa = kappa > 0.0 ? kappa : split.sigma / 2.0;
  s.kappa_bar = kappa_ratio * s.kappa;
  const double gap = s.kappa - s.kappa_bar;
  const double t_check = std::max(40.0, 4.0 * (split.m_pow + 1) / gap);
  const int grid = 400;
  const double h = t_check / grid;
  double worst = 1.0;
  if (split.k > 0) {
    const Matrix shifted = split.b_plus + s.kappa * Matrix::Identity(split.k, split.k);
    const Matrix step = expm(shifted * h);
    Matrix e = Matrix::Identity(split.k, split.k);
    for (int j = 0; j <= grid; ++j) {
      worst = std::max(worst, norm2(e) * std::exp(s.kappa_bar * j * h));
      e = step * e;
    }
  }
  if (split.k < split.n) {
    const auto d = split.n - split.k;
    const Matrix shifted = split.b_minus + s.kappa * Matrix::Identity(d, d);
    const Matrix step = expm(-shifted * h);
    Matrix e = Matrix::Identity(d, d);
    for (int j = 0; j <= grid; ++j) {
      worst = std::max(worst, norm2(e) * std::exp(s.kappa_bar * j * h));
      e = step * e;
    }
  }
  s.K_bar = 1.1 * worst;
  s.alpha1 = s.kappa_bar / 2.0;
  s.alpha_tilde = s.kappa - s.alpha1;
  s.D = 2.0 * s.K_bar;
  s.l_bar = bundle.l_block * std::exp(s.kappa * bundle.theta);
  s.p_bar = s.K_bar * (1.0 + std::exp(s.alpha1 * bundle.theta)) *
            (1.0 / (s.kappa_bar + s.alpha1) + 1.0 / (s.kappa_bar - s.alpha1));
  s.two_p_l_bar = 2.0 * s.p_bar * s.l_bar;
  s.smallness_pass = s.two_p_l_bar < 1.0;
  s.P_analytic = s.p_bar * s.K_bar * std::exp(s.kappa * bundle.theta);
  return s;
}

ManifoldBuilder::ManifoldBuilder(const HybridSystem& sys, const ArgumentSchedule& sched,
                                 SpectralSplit split, ConstantsBundle bundle,
                                 ManifoldOptions options)
    : sys_(sys),
      sched_(sched),
      split_(std::move(split)),
      bundle_(std::move(bundle)),
      options_(options),
      shifted_(shifted_constants(split_, bundle_, options.kappa, options.kappa_ratio)) {
  if (split_.n != sys.dim()) throw ParameterError("manifolds", "split dimension mismatch");
}

double ManifoldBuilder::horizon_F() const {
  if (options_.horizon > 0.0) return options_.horizon;
  return std::log(bundle_.K / options_.tol) / split_.sigma;
}

double ManifoldBuilder::horizon_G() const {
  if (options_.horizon > 0.0) return options_.horizon;
  return std::log(shifted_.K_bar / options_.tol) / shifted_.kappa_bar;
}

Vector ManifoldBuilder::block_f(double t, double anchor_time, const Vector& y,
                                const Vector& ybar) const {
  return split_.transform *
         sys_.nonlinearity(t, anchor_time, split_.transform_inv * y, split_.transform_inv * ybar);
}

ManifoldApprox ManifoldBuilder::eval_F(double t0, const Vector& c) const {
  return eval_F(t0, c, options_);
}

ManifoldApprox ManifoldBuilder::eval_F(double t0, const Vector& c,
                                       const ManifoldOptions& options) const {
  if (!bundle_.c10_pass) {
    std::ostringstream os;
    os << "stable surface needs 2pl < 1, have " << bundle_.two_p_l;
    throw SmallnessError("manifolds", os.str());
  }
  return eval_F_with(
      [this](double t, double a, const Vector& y, const Vector& yb) { return block_f(t, a, y, yb); },
      t0, c, options);
}

ManifoldApprox ManifoldBuilder::eval_F_with(
    const std::function<Vector(double, double, const Vector&, const Vector&)>& q, double t0,
    const Vector& c, const ManifoldOptions& options) const {
  const int n = split_.n;
  const int k = split_.k;
  if (k == 0) throw ParameterError("manifolds", "the stable block is empty");
  if (c.size() != k) throw ParameterError("manifolds", "c must have the stable dimension");

  ManifoldOptions opt = options;
  const double horizon =
      opt.horizon > 0.0 ? opt.horizon : std::log(bundle_.K / opt.tol) / split_.sigma;
  const long i0 = sched_.interval_index(t0);
  const double lo = std::min(t0, sched_.zeta(i0));
  const double hi = theta_at_or_after(sched_, t0 + horizon);

  detail::PicardProblem pr;
  pr.sched = &sched_;
  pr.lo = lo;
  pr.hi = hi;
  pr.extra_breaks = {t0};
  pr.step = opt.step;
  pr.dim = n;
  pr.g = q;
  pr.blocks.push_back({split_.b_plus, 0, t0, c});
  if (n > k) pr.blocks.push_back({split_.b_minus, k, hi, Vector::Zero(n - k)});
  pr.tol = opt.tol;
  pr.max_iter = opt.max_iter;
  pr.init = to_detail(opt.init);
  auto res = detail::picard_solve(pr);

  ManifoldApprox out;
  out.kind = ManifoldKind::stable;
  out.anchor_time = t0;
  out.horizon = horizon;
  out.iterates = res.iterations;
  out.deltas = res.deltas;
  out.last_delta = res.last_delta;
  out.lipschitz_bound = bundle_.p_const * bundle_.K * bundle_.l_block;
  out.value = res.at(t0).tail(n - k);
  const double cn = c.norm();
  for (std::size_t j = 0; j < res.times.size(); ++j) {
    const double t = res.times[j];
    if (t < t0) continue;
    const double env = 2.0 * bundle_.K * cn * std::exp(-bundle_.alpha * (t - t0));
    const double norm = res.states[j].norm();
    if (env > 0.0) out.envelope_ratio = std::max(out.envelope_ratio, norm / env);
    if (norm > env + 10.0 * opt.tol) out.envelope_ok = false;
  }
  out.times = std::move(res.times);
  out.states = std::move(res.states);
  return out;
}

ManifoldApprox ManifoldBuilder::eval_G(double t0, const Vector& d) const {
  return eval_G(t0, d, options_);
}

ManifoldApprox ManifoldBuilder::eval_G(double t0, const Vector& d,
                                       const ManifoldOptions& options) const {
  const int n = split_.n;
  const int k = split_.k;
  if (n == k) throw ParameterError("manifolds", "the centre block is empty");
  if (d.size() != n - k) throw ParameterError("manifolds", "d must have the centre dimension");
  if (!shifted_.smallness_pass) {
    std::ostringstream os;
    os << "centre surface needs 2 p_bar l_bar < 1 for the shifted system, have "
       << shifted_.two_p_l_bar;
    throw SmallnessError("manifolds", os.str());
  }

  ManifoldApprox out;
  out.kind = ManifoldKind::centre;
  out.anchor_time = t0;
  out.lipschitz_bound = shifted_.P_analytic * bundle_.l_block;
  if (k == 0) {
    out.value = Vector(0);
    return out;
  }

  const ManifoldOptions& opt = options;
  const double kappa = shifted_.kappa;
  const double horizon = opt.horizon > 0.0
                             ? opt.horizon
                             : std::log(shifted_.K_bar / opt.tol) / shifted_.kappa_bar;
  const long i0 = sched_.interval_index(t0);
  const double lo = theta_at_or_before(sched_, t0 - horizon);
  const double hi = std::max(t0, sched_.zeta(i0));

  detail::PicardProblem pr;
  pr.sched = &sched_;
  pr.lo = lo;
  pr.hi = hi;
  pr.extra_breaks = {t0};
  pr.step = opt.step;
  pr.dim = n;
  // Time origin of the shift at t0 keeps the weights O(1).
  pr.g = [this, kappa, t0](double t, double a, const Vector& eta, const Vector& etab) {
    const double et = std::exp(kappa * (t - t0));
    const double ea = std::exp(kappa * (a - t0));
    return Vector(et * block_f(t, a, eta / et, etab / ea));
  };
  pr.blocks.push_back({split_.b_plus + kappa * Matrix::Identity(k, k), 0, lo, Vector::Zero(k)});
  pr.blocks.push_back({split_.b_minus + kappa * Matrix::Identity(n - k, n - k), k, t0, d});
  pr.tol = opt.tol;
  pr.max_iter = opt.max_iter;
  pr.init = to_detail(opt.init);
  auto res = detail::picard_solve(pr);

  out.horizon = horizon;
  out.iterates = res.iterations;
  out.deltas = res.deltas;
  out.last_delta = res.last_delta;
  out.value = res.at(t0).head(k);
  const double dn = d.norm();
  for (std::size_t j = 0; j < res.times.size(); ++j) {
    const double t = res.times[j];
    res.states[j] *= std::exp(-kappa * (t - t0));
    if (t > t0) continue;
    const double env = shifted_.D * dn * std::exp(-shifted_.alpha_tilde * (t - t0));
    const double norm = res.states[j].norm();
    if (env > 0.0) out.envelope_ratio = std::max(out.envelope_ratio, norm / env);
    if (norm > env + 10.0 * opt.tol) out.envelope_ok = false;
  }
  out.times = std::move(res.times);
  out.states = std::move(res.states);
  return out;
}

double ManifoldBuilder::tail_bound(double horizon, double c_norm) const {
  const double a = bundle_.alpha;
  const int m = bundle_.m_pow;
  // \int_H^\infty (1 + s^m) e^{-a s} ds with the upper incomplete gamma in closed form.
  double partial = 0.0;
  double term = 1.0;
  for (int j = 0; j <= m; ++j) {
    if (j > 0) term *= a * horizon / j;
    partial += term;
  }
  const double tail = std::exp(-a * horizon) *
                      (1.0 / a + std::tgamma(m + 1.0) * partial / std::pow(a, m + 1));
  return 2.0 * bundle_.K * bundle_.K * bundle_.l_block * c_norm *
         (1.0 + std::exp(a * bundle_.theta)) * tail;
}

double estimate_P(const ManifoldBuilder& builder, double t0, int pairs, std::uint64_t seed,
                  double radius) {
  const auto& split = builder.split();
  const double l = builder.bundle().l_block;
  if (l == 0.0 || split.k == 0) return 0.0;
  const int d = split.n - split.k;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-radius, radius);
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Vector d1(d), d2(d);
    for (int j = 0; j < d; ++j) {
      d1(j) = box(rng);
      d2(j) = box(rng);
    }
    const double den = l * (d1 - d2).norm();
    if (den == 0.0) continue;
    const Vector g1 = builder.eval_G(t0, d1).value;
    const Vector g2 = builder.eval_G(t0, d2).value;
    worst = std::max(worst, (g1 - g2).norm() / den);
  }
  return 1.1 * worst;
}

InvarianceReport verify_surface_invariance(const ManifoldBuilder& builder, long i,
                                           const Vector& c, int span,
                                           const SolverOptions& solver, double delta_off) {
  const auto& sys = builder.system();
  const auto& sched = builder.schedule();
  const auto& split = builder.split();
  const double zeta = sched.zeta(i);
  const long last = i + span;
  if (last + 1 > sched.i_max()) {
    throw WindowError("invariance span leaves the schedule window", sched.t_min(), sched.t_max());
  }
  const Vector F = builder.eval_F(zeta, c).value;
  const Vector z0 = split.from_blocks(split.join(c, F));
  const double t_end = sched.theta(last + 1);
  const auto on = solve_forward(sys, sched, zeta, z0, t_end, solver);

  InvarianceReport rep;
  for (long j = i + 1; j <= last; ++j) {
    const double zj = sched.zeta(j);
    const Vector y = split.to_blocks(on.at(zj));
    const Vector Fj = builder.eval_F(zj, split.u_part(y)).value;
    rep.zetas.push_back(zj);
    rep.defects.push_back((split.v_part(y) - Fj).norm());
    rep.max_defect = std::max(rep.max_defect, rep.defects.back());
  }

  Vector shift = Vector::Zero(split.n - split.k);
  if (shift.size() > 0) shift(0) = delta_off;
  const Vector z_off = split.from_blocks(split.join(c, F + shift));
  const auto off = solve_forward(sys, sched, zeta, z_off, t_end, solver);
  const int samples = 101;
  rep.off_min_v = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const double t = zeta + (t_end - zeta) * s / (samples - 1);
    rep.off_times.push_back(t);
    rep.off_v_norms.push_back(split.v_part(split.to_blocks(off.at(t))).norm());
    rep.on_v_norms.push_back(split.v_part(split.to_blocks(on.at(t))).norm());
    rep.off_min_v = std::min(rep.off_min_v, rep.off_v_norms.back());
  }
  return rep;
}

GCache::GCache(const ManifoldBuilder& builder, GCacheOptions options)
    : builder_(builder), options_(options) {
  const auto& split = builder.split();
  vdim_ = split.n - split.k;
  if (vdim_ == 0) throw DegenerateDimensionError("no centre directions to tabulate");
  if (options_.v_nodes < 3 || options_.v_nodes % 2 == 0) {
    throw ParameterError("manifolds", "v_nodes must be odd and at least 3");
  }
  const int half = (options_.v_nodes - 1) / 2;
  std::vector<double> pos;
  for (int j = 1; j <= half; ++j) {
    const double e = half == 1 ? 0.0 : double(half - j) / (half - 1);
    pos.push_back(options_.box * std::pow(options_.inner, e));
  }
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) axis_.push_back(-*it);
  axis_.push_back(0.0);
  axis_.insert(axis_.end(), pos.begin(), pos.end());

  const auto& sched = builder.schedule();
  periodic_ = options_.use_periodicity && sched.is_periodic() && builder.system().autonomous();
  // G only looks backward, so the last interval has the most room.
  representative_ = sched.i_max() - 1;
}

std::size_t GCache::tables_built() const {
  std::lock_guard lock(mutex_);
  return tables_.size();
}

GCache::Table GCache::build(long interval) const {
  const auto& sched = builder_.schedule();
  const double a = sched.theta(interval);
  const double b = sched.theta(interval + 1);
  Table tab;
  for (int j = 0; j < options_.t_nodes; ++j) {
    tab.times.push_back(a + (b - a) * j / (options_.t_nodes - 1));
  }
  const double z = sched.zeta(interval);
  if (std::none_of(tab.times.begin(), tab.times.end(),
                   [&](double t) { return std::abs(t - z) <= 1e-12 * std::max(1.0, std::abs(z)); })) {
    tab.times.push_back(z);
    std::sort(tab.times.begin(), tab.times.end());
  }
  const auto nv = static_cast<std::size_t>(std::pow(options_.v_nodes, vdim_));
  const int k = builder_.split().k;
  for (double t : tab.times) {
    std::vector<Vector> row(nv);
    for (std::size_t flat = 0; flat < nv; ++flat) {
      Vector v(vdim_);
      std::size_t rest = flat;
      for (int d = 0; d < vdim_; ++d) {
        v(d) = axis_[rest % options_.v_nodes];
        rest /= options_.v_nodes;
      }
      row[flat] = v.isZero(0.0) ? Vector(Vector::Zero(k)) : builder_.eval_G(t, v).value;
    }
    tab.values.push_back(std::move(row));
  }
  return tab;
}

const GCache::Table& GCache::table_for(long interval) const {
  std::lock_guard lock(mutex_);
  auto it = tables_.find(interval);
  if (it == tables_.end()) {
    it = tables_.emplace(interval, std::make_shared<const Table>(build(interval))).first;
  }
  return *it->second;
}

Vector GCache::operator()(double t, const Vector& v) const {
  if (v.size() != vdim_) throw ParameterError("manifolds", "v has the wrong dimension");
  const auto& sched = builder_.schedule();
  long j = sched.interval_index(t);
  if (periodic_ && j != representative_) {
    t = t - sched.theta(j) + sched.theta(representative_);
    j = representative_;
  }
  const auto& tab = table_for(j);

  // t bracket
  auto tt = std::upper_bound(tab.times.begin(), tab.times.end(), t);
  std::size_t t1 = std::clamp<std::size_t>(tt - tab.times.begin(), 1, tab.times.size() - 1);
  const std::size_t t0i = t1 - 1;
  const double ts = std::clamp((t - tab.times[t0i]) / (tab.times[t1] - tab.times[t0i]), 0.0, 1.0);

  // v brackets
  std::vector<std::size_t> lo(vdim_);
  std::vector<double> frac(vdim_);
  for (int d = 0; d < vdim_; ++d) {
    const double x = v(d);
    if (!(std::abs(x) <= options_.box * (1.0 + 1e-12))) {
      std::ostringstream os;
      os << "centre coordinate " << x << " outside the tabulated box [-" << options_.box << ", "
         << options_.box << "]";
      throw BoxExceededError(os.str());
    }
    auto it = std::upper_bound(axis_.begin(), axis_.end(), x);
    const std::size_t hi =
        std::clamp<std::size_t>(it - axis_.begin(), 1, axis_.size() - 1);
    lo[d] = hi - 1;
    frac[d] = std::clamp((x - axis_[lo[d]]) / (axis_[hi] - axis_[lo[d]]), 0.0, 1.0);
  }

  const int k = builder_.split().k;
  Vector out = Vector::Zero(k);
  const std::size_t corners = std::size_t{1} << vdim_;
  for (std::size_t corner = 0; corner < corners; ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    std::size_t stride = 1;
    for (int d = 0; d < vdim_; ++d) {
      const bool up = (corner >> d) & 1U;
      w *= up ? frac[d] : 1.0 - frac[d];
      flat += (lo[d] + (up ? 1 : 0)) * stride;
      stride *= static_cast<std::size_t>(options_.v_nodes);
    }
    if (w == 0.0) continue;
    out += w * ((1.0 - ts) * tab.values[t0i][flat] + ts * tab.values[t1][flat]);
  }
  return out;
}

}  // namespace epcag
