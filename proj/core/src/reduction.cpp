#include "epcag/reduction.hpp"

#include "epcag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace epcag {

HybridSystem build_reduced(const ManifoldBuilder& builder, CentreMap g, double P) {
  const auto& split = builder.split();
  const int n = split.n;
  const int k = split.k;
  if (n == k) throw DegenerateDimensionError("the split has no centre directions");
  const ManifoldBuilder* b = &builder;
  AnchoredNonlinearity f = [b, g = std::move(g), n, k](double t, double anchor, const Vector& v,
                                                       const Vector& vbar) {
    Vector y(n), ybar(n);
    y.head(k) = g(t, v);
    y.tail(n - k) = v;
    ybar.head(k) = g(anchor, vbar);
    ybar.tail(n - k) = vbar;
    return Vector(b->block_f(t, anchor, y, ybar).tail(n - k));
  };
  SystemOptions opt = builder.system().options();
  opt.validate = false;
  opt.name = "reduced " + opt.name;
  const double l = builder.bundle().l_block;
  return HybridSystem(split.b_minus, std::move(f), l * (1.0 + P * l), opt);
}

PhaseResult asymptotic_phase(const ManifoldBuilder& builder, double zeta, const Vector& z0,
                             const PhaseOptions& options) {
  const auto& split = builder.split();
  const auto& sys = builder.system();
  const auto& sched = builder.schedule();
  const auto& bundle = builder.bundle();
  if (split.k == 0 || split.k == split.n) {
    throw DegenerateDimensionError("asymptotic phase needs both stable and centre directions");
  }
  auto G = [&](const Vector& d) { return builder.eval_G(zeta, d).value; };
  auto to_block = [&](const Trajectory& tr, double t) { return split.to_blocks(tr.at(t)); };

  const Vector y0 = split.to_blocks(z0);
  const Vector u0 = split.u_part(y0);
  const Vector v0 = split.v_part(y0);

  PhaseResult out;
  const double l = bundle.l_block;
  const double pk = bundle.p_const * bundle.K;
  out.assumptions_hold = 1.0 - pk * options.P * l * l > 0.0 && pk * l * (1.0 + options.P * l) <= 1.0;
  out.ball_radius = (u0 - G(v0)).norm();

  // The companion must cover the truncated domain of the translated stable map.
  const double horizon = builder.horizon_F();
  const double reach = zeta + horizon;
  if (reach >= sched.t_max()) {
    throw WindowError("phase horizon leaves the schedule window", sched.t_min(), sched.t_max());
  }
  const double t_reach = sched.theta(sched.interval_index(reach) + 1);

  ManifoldOptions mopt = builder.options();
  mopt.tol = std::min(mopt.tol, options.tol * 1e-2);

  Vector d = v0;
  bool converged = false;
  for (int j = 0; j < options.max_iter; ++j) {
    const Vector Gd = G(d);
    const Vector X0 = u0 - Gd;
    const auto mu = solve_forward(sys, sched, zeta, split.from_blocks(split.join(Gd, d)), t_reach,
                                  options.solver);
    auto q = [&](double t, double a, const Vector& Y, const Vector& Yb) {
      const Vector m = to_block(mu, t);
      const Vector mb = to_block(mu, a);
      return Vector(builder.block_f(t, a, Y + m, Yb + mb) - builder.block_f(t, a, m, mb));
    };
    const Vector Ft = builder.eval_F_with(q, zeta, X0, mopt).value;
    const Vector next = v0 - Ft;
    const double dist = (next - v0).norm();
    out.ball_distances.push_back(dist);
    out.iterations = j + 1;
    if (dist > out.ball_radius * (1.0 + 1e-9) + 1e-14) {
      std::ostringstream os;
      os << "phase iterate " << j + 1 << " left the ball: ||d - v0|| = " << dist << " > "
         << out.ball_radius;
      throw ContractionFailureError(os.str());
    }
    const double change = (next - d).norm();
    d = next;
    if (change < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "phase iteration did not settle in " << options.max_iter << " iterates";
    throw ContractionFailureError(os.str());
  }

  out.d_star = d;
  const Vector Gd = G(d);
  out.X0 = u0 - Gd;
  const double span = options.span > 0.0 ? options.span : 10.0 * bundle.theta;
  const double t_end = zeta + span;
  out.solution = solve_forward(sys, sched, zeta, z0, t_end, options.solver);
  out.companion =
      solve_forward(sys, sched, zeta, split.from_blocks(split.join(Gd, d)), t_end, options.solver);
  out.bound = bundle.K * (1.0 + bundle.two_p_l) * out.X0.norm() * 1.1;
  for (int s = 0; s < options.samples; ++s) {
    const double t = zeta + span * s / (options.samples - 1);
    const double diff = (to_block(out.solution, t) - to_block(out.companion, t)).norm();
    out.times.push_back(t);
    out.weighted.push_back(diff * std::exp(bundle.alpha * (t - zeta)));
    out.max_weighted = std::max(out.max_weighted, out.weighted.back());
  }
  out.bounded = out.max_weighted <= out.bound;
  return out;
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::unstable: return "unstable";
    case Stability::stable: return "stable";
    case Stability::asymptotic: return "asymptotically-stable";
    case Stability::exponential: return "exponentially-stable";
  }
  return "unknown";
}

Stability coarse(Stability s) {
  return s == Stability::exponential ? Stability::asymptotic : s;
}

namespace {

struct Sample {
  double t;
  double norm;
};

// Least-squares fit of log(envelope) against t; returns (rate, R^2).
std::pair<double, double> log_linear_fit(const std::vector<Sample>& env) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  int count = 0;
  for (const auto& s : env) {
    if (!(s.norm > 1e-300)) continue;
    const double y = std::log(s.norm);
    st += s.t;
    sy += y;
    stt += s.t * s.t;
    sty += s.t * y;
    ++count;
  }
  if (count < 3) return {0.0, 0.0};
  const double mt = st / count;
  const double my = sy / count;
  const double vt = stt / count - mt * mt;
  if (vt <= 0.0) return {0.0, 0.0};
  const double slope = (sty / count - mt * my) / vt;
  double ss_res = 0, ss_tot = 0;
  for (const auto& s : env) {
    if (!(s.norm > 1e-300)) continue;
    const double y = std::log(s.norm);
    const double fit = my + slope * (s.t - mt);
    ss_res += (y - fit) * (y - fit);
    ss_tot += (y - my) * (y - my);
  }
  if (ss_tot <= 0.0) return {-slope, 0.0};
  return {-slope, 1.0 - ss_res / ss_tot};
}

StabilityEvidence run_one(const HybridSystem& sys, const ArgumentSchedule& sched, double t0,
                          const Vector& z0, double radius, double horizon,
                          const StabilityOptions& opt) {
  StabilityEvidence ev;
  ev.t0 = t0;
  ev.radius = radius;
  ev.horizon = horizon;
  std::vector<Sample> samples{{t0, z0.norm()}};
  const double escape = opt.escape_factor * radius;
  auto observe = [&](const Segment& seg) {
    for (std::size_t j = 0; j < seg.times.size(); ++j) {
      if (seg.times[j] <= samples.back().t) continue;
      samples.push_back({seg.times[j], seg.states[j].norm()});
    }
    return seg.max_norm() <= escape;
  };
  try {
    solve_forward(sys, sched, t0, z0, t0 + horizon, opt.solver, observe);
  } catch (const BlowUpError&) {
    ev.blew_up = true;
  } catch (const NonContractionError&) {
    ev.blew_up = true;
  }
  for (const auto& s : samples) ev.max_excursion = std::max(ev.max_excursion, s.norm);
  ev.final_norm = samples.back().norm;
  if (ev.blew_up) {
    ev.max_excursion = std::numeric_limits<double>::infinity();
    return ev;
  }
  if (ev.max_excursion > escape || samples.back().t < t0 + horizon * (1.0 - 1e-12)) return ev;

  // Running maximum from the right: the sup-norm envelope.
  std::vector<Sample> env(samples.size());
  double run = 0.0;
  for (std::size_t j = samples.size(); j-- > 0;) {
    run = std::max(run, samples[j].norm);
    env[j] = {samples[j].t, run};
  }
  auto env_at = [&](double t) {
    auto it = std::lower_bound(env.begin(), env.end(), t,
                               [](const Sample& s, double v) { return s.t < v; });
    return it == env.end() ? env.back().norm : it->norm;
  };
  const double q2 = env_at(t0 + 0.5 * horizon);
  const double q3 = env_at(t0 + 0.75 * horizon);
  const double q4 = env.back().norm;
  const double d3 = q2 - q3;
  const double d4 = q3 - q4;
  ev.sustained_decay = d3 > 0.0 && d4 > 1e-6 * radius && d4 >= 0.1 * d3;

  std::vector<Sample> late;
  for (const auto& s : env) {
    if (s.t >= t0 + 0.5 * horizon) late.push_back(s);
  }
  const auto [rate, r2] = log_linear_fit(late);
  ev.fit_rate = rate;
  ev.fit_r2 = r2;
  return ev;
}

}  // namespace

StabilityVerdict classify_stability(const HybridSystem& sys, const ArgumentSchedule& sched,
                                    const StabilityOptions& options) {
  const int n = sys.dim();
  const double horizon = options.horizon > 0.0 ? options.horizon : 20.0 * sched.theta_bound();
  StabilityVerdict verdict;
  verdict.t0_sweep = options.t0_samples;
  if (verdict.t0_sweep.empty()) {
    long j0 = sched.i_min();
    if (sched.t_min() <= 0.0 && 0.0 < sched.t_max()) j0 = sched.interval_index(0.0);
    for (long j = j0; j < j0 + 5 && j < sched.i_max(); ++j) verdict.t0_sweep.push_back(sched.zeta(j));
  }
  for (double t0 : verdict.t0_sweep) {
    if (t0 < sched.t_min() || t0 + horizon > sched.t_max()) {
      std::ostringstream os;
      os << "stability run [" << t0 << ", " << t0 + horizon << "] leaves the schedule window";
      throw WindowError(os.str(), sched.t_min(), sched.t_max());
    }
  }

  std::vector<Vector> dirs;
  for (int j = 0; j < n; ++j) {
    Vector e = Vector::Zero(n);
    e(j) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int r = 0; r < options.random_dirs; ++r) {
    Vector v(n);
    for (int j = 0; j < n; ++j) v(j) = gauss(rng);
    dirs.push_back(v / v.norm());
  }

  bool unstable = false;
  bool asymptotic = true;
  bool exponential = true;
  double rate = std::numeric_limits<double>::infinity();
  for (double t0 : verdict.t0_sweep) {
    for (double radius : options.radii) {
      for (const auto& dir : dirs) {
        auto ev = run_one(sys, sched, t0, radius * dir, radius, horizon, options);
        if (ev.blew_up || ev.max_excursion > options.escape_factor * radius ||
            ev.max_excursion > options.bound_factor * radius) {
          unstable = true;
        }
        const bool decayed = ev.final_norm <= options.decay_factor * radius;
        if (!decayed && !ev.sustained_decay) asymptotic = false;
        if (!decayed || ev.fit_r2 < options.fit_r2 || !(ev.fit_rate > 0.0)) {
          exponential = false;
        } else {
          rate = std::min(rate, ev.fit_rate);
        }
        verdict.evidence.push_back(ev);
      }
    }
  }
  if (unstable) {
    verdict.classification = Stability::unstable;
  } else if (asymptotic && exponential) {
    verdict.classification = Stability::exponential;
    verdict.rate = rate;
  } else if (asymptotic) {
    verdict.classification = Stability::asymptotic;
  } else {
    verdict.classification = Stability::stable;
  }
  return verdict;
}

ReductionResult reduction_check(const ManifoldBuilder& builder, CentreMap g, double P,
                                const StabilityOptions& options) {
  ReductionResult out;
  out.full = classify_stability(builder.system(), builder.schedule(), options);
  const auto reduced = build_reduced(builder, std::move(g), P);
  out.reduced = classify_stability(reduced, builder.schedule(), options);
  out.agree = coarse(out.full.classification) == coarse(out.reduced.classification);
  return out;
}

}  // namespace epcag
