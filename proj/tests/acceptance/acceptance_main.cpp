// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "epcag/analysis.hpp"
#include "epcag/catalog.hpp"
#include "epcag/errors.hpp"
#include "epcag/harness.hpp"
#include "epcag/manifolds.hpp"
#include "epcag/reduction.hpp"
#include "epcag/solver.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#ifndef EPCAG_CONFIG_DIR
#define EPCAG_CONFIG_DIR "configs"
#endif

using namespace epcag;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

ArgumentSchedule epca(long lo, long hi) {
  ScheduleParams p;
  p.i_min = lo;
  p.i_max = hi;
  return make_schedule(ScheduleKind::epca, p);
}

ArgumentSchedule alternating(long lo, long hi) {
  ScheduleParams p;
  p.i_min = lo;
  p.i_max = hi;
  return make_schedule(ScheduleKind::alternating, p);
}

HybridSystem example1_system() {
  SystemOptions opt;
  opt.validate = false;
  return make_catalog_system("example1-quadratic", {{"R", 10.0}}, Matrix::Constant(1, 1, 3.0), opt);
}

// A = diag(-1, 0) with the tanh coupling at l = 0.01 on a wide EPCA window.
struct TanhSetup {
  ArgumentSchedule sched = epca(-150, 200);
  HybridSystem sys = make_catalog_system("tanh-coupled", {{"eps", 0.01}}, diag2(-1.0, 0.0));
  SpectralSplit split = spectral_split(sys.a());
  ConstantsBundle bundle =
      compute_constants(sys.a(), split, sched, sys.lipschitz(), 0.5 * split.sigma);
  ManifoldBuilder builder{sys, sched, split, bundle};

  Vector on_surface(const Vector& c) const {
    return split.from_blocks(split.join(c, builder.eval_F(0.0, c).value));
  }
};

Outcome epca_oracle() {
  const double a = -1.0, b = 0.25;
  const auto sched = epca(0, 6);
  const auto sys = make_catalog_system("epca-linear", {{"b", b}}, Matrix::Constant(1, 1, a));
  const auto tr = solve_forward(sys, sched, 0.0, Vector::Ones(1), 5.0, SolverOptions{});
  // z(i) from the per-interval formula, independently of the solver
  auto exact = [&](double t) {
    double zi = 1.0;
    const long i = static_cast<long>(std::floor(t));
    for (long j = 0; j < i; ++j) zi *= std::exp(a) + (b / a) * (std::exp(a) - 1.0);
    const double e = std::exp(a * (t - i));
    return (e + (b / a) * (e - 1.0)) * zi;
  };
  double worst = 0.0;
  std::vector<double> ts;
  for (int i = 0; i <= 5; ++i) ts.push_back(i);
  for (int k = 0; k < 50; ++k) ts.push_back(0.05 + 0.1 * k);
  for (double t : ts) worst = std::max(worst, std::abs(tr.at(t)(0) - exact(t)) / std::abs(exact(t)));
  return {worst <= 1e-6, fmt("max relative error %.3g over 56 points (limit 1e-6)", worst)};
}

Outcome example1_backward() {
  const auto sched = alternating(0, 2);
  const auto sys = example1_system();
  const double z0 = 1.0, z1 = oracle::example1_collision_sum() - z0;
  const SolverOptions opt{.step = 0.001, .tol = 1e-13};
  const double n0 = solve_forward(sys, sched, 0.0, Vector::Constant(1, z0), 1.0, opt).at(1.0)(0);
  const double n1 = solve_forward(sys, sched, 0.0, Vector::Constant(1, z1), 1.0, opt).at(1.0)(0);
  const double gap = std::abs(n0 - n1);
  const auto back = solve_backward(sys, sched, 1.0, Vector::Constant(1, n0), -1.0, opt);
  const bool flagged = back.non_unique();
  return {gap <= 1e-8 && flagged,
          fmt("z0 = 1, z1 = %.6f, |z0(1) - z1(1)| = %.3g (limit 1e-8), non-unique flagged = %g", z1,
              gap, flagged ? 1.0 : 0.0)};
}

Outcome contraction_rate() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 0.5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int instances = 0, solves = 0, bad = 0;
  double worst_margin = -1.0;
  std::uint64_t seed = 1;
  while (instances < 20) {
    ScheduleParams p;
    p.i_min = 0;
    p.i_max = 8;
    p.theta_bound = 0.5 + 0.5 * (u(rng) + 1.0);
    p.seed = seed++;
    const auto sched = make_schedule(ScheduleKind::randomized, p);
    Matrix a(2, 2);
    a << g(rng), g(rng), g(rng), g(rng);
    const double eps = 0.02 + 0.03 * (u(rng) + 1.0);
    const auto sys = make_catalog_system("tanh-coupled", {{"eps", eps}}, a);
    const double omega = norm2(a);
    const double theta = sched.theta_bound();
    const double x = std::exp(omega * theta) * eps * theta;
    // (C5) with M = e^{omega theta}, m = e^{-omega theta}
    const double q = x * std::exp(x);
    if (!(q < 1.0 && 2.0 * x < 1.0 &&
          std::exp(2 * omega * theta) * eps * theta * ((q + 1.0) / (1.0 - q) + q) <
              std::exp(-omega * theta))) {
      continue;
    }
    ++instances;
    const double bound = 2.0 * x + 0.05;
    Vector z(2);
    z << u(rng), u(rng);
    for (long i = 0; i < 8; ++i) {
      const auto sol = solve_anchor(sys, sched, i, sched.theta(i), z, SolverOptions{});
      ++solves;
      bool ok = sol.contracted;
      for (std::size_t m = 1; m < sol.deltas.size(); ++m) {
        if (sol.deltas[m] == 0.0) break;
        ok = ok && sol.deltas[m] < sol.deltas[m - 1];
      }
      for (double r : sol.ratios) {
        ok = ok && r <= bound;
        worst_margin = std::max(worst_margin, r - (bound - 0.05));
      }
      if (!ok) ++bad;
      z = sol.segment.back();
    }
  }
  return {bad == 0, fmt("%g instances, %g anchor solves, %g violations; ", instances, solves, bad) +
                        fmt("worst ratio minus 2Ml theta = %.3g (limit +0.05)", worst_margin)};
}

Outcome stable_decay() {
  TanhSetup s;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double K = s.bundle.K, alpha = s.bundle.alpha;
  double worst = -1.0;
  for (int k = 0; k < 20; ++k) {
    const Vector c = Vector::Constant(1, u(rng));
    const Vector z0 = s.on_surface(c);
    const auto tr = solve_forward(s.sys, s.sched, 0.0, z0, 10.0, SolverOptions{});
    for (const auto& seg : tr.segments()) {
      for (std::size_t j = 0; j < seg.times.size(); ++j) {
        const double env = 2.0 * K * c.norm() * std::exp(-alpha * seg.times[j]) + 1e-4;
        worst = std::max(worst, seg.states[j].norm() - env);
      }
    }
  }
  return {worst <= 0.0,
          fmt("max of ||z(t)|| - (2K||c||e^{-alpha t} + 1e-4) = %.3g over 20 starts (K = %.3g, alpha = %.3g)",
              worst, K, alpha)};
}

Outcome graph_properties() {
  TanhSetup s;
  const double f0 = s.builder.eval_F(0.0, Vector::Zero(1)).value.norm();
  const double g0 = s.builder.eval_G(0.0, Vector::Zero(1)).value.norm();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pkl = s.bundle.p_const * s.bundle.K * s.bundle.l_block;
  double worst_ratio = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vector c1 = Vector::Constant(1, u(rng));
    const Vector c2 = Vector::Constant(1, u(rng));
    const double d = (c1 - c2).norm();
    if (d == 0.0) continue;
    worst_ratio = std::max(
        worst_ratio, (s.builder.eval_F(0.0, c1).value - s.builder.eval_F(0.0, c2).value).norm() / d);
  }
  // the default horizon and a short one where the truncation is visible
  double worst_tail = -1.0, worst_change = 0.0;
  for (double h : {s.builder.horizon_F(), 4.0}) {
    ManifoldOptions base = s.builder.options(), doubled = base;
    base.horizon = h;
    doubled.horizon = 2.0 * h;
    for (double c : {-1.0, -0.4, 0.3, 1.0}) {
      const Vector cv = Vector::Constant(1, c);
      const double change =
          (s.builder.eval_F(0.0, cv, base).value - s.builder.eval_F(0.0, cv, doubled).value).norm();
      worst_change = std::max(worst_change, change);
      worst_tail = std::max(worst_tail, change - s.builder.tail_bound(h, cv.norm()));
    }
  }
  const bool pass = f0 <= 1e-10 && g0 <= 1e-10 && worst_ratio <= 1.05 * pkl && worst_tail <= 0.0;
  return {pass, fmt("|F(0,0)| = %.2g, |G(0,0)| = %.2g, ", f0, g0) +
                    fmt("max Lipschitz ratio %.4g vs pKl*1.05 = %.4g, ", worst_ratio, 1.05 * pkl) +
                    fmt("horizon doubling: max change %.3g, max change minus tail bound %.3g", worst_change,
                        worst_tail)};
}

Outcome invariance() {
  TanhSetup s;
  const double quad_tol = s.builder.options().tol;
  const SolverOptions solver{.step = 0.01, .tol = 1e-12};
  const double limit = 10.0 * (quad_tol + solver.tol);
  double worst = 0.0;
  for (double c : {-1.0, -0.5, 0.2, 0.7, 1.0}) {
    const auto rep = verify_surface_invariance(s.builder, 0, Vector::Constant(1, c), 5, solver);
    worst = std::max(worst, rep.max_defect);
  }
  return {worst <= limit, fmt("max defect %.3g over 5 starts x 5 anchors (limit %.3g)", worst, limit)};
}

Outcome asymptotic_phase_bound() {
  TanhSetup s;
  PhaseOptions opt;
  opt.P = estimate_P(s.builder, 0.0, 20, 3, 1.0);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int ok = 0;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Vector z0(2);
    do {
      z0 << u(rng), u(rng);
    } while (z0.norm() >= 1.0);
    const auto r = asymptotic_phase(s.builder, 0.0, z0, opt);
    bool in_ball = true;
    for (double d : r.ball_distances) in_ball = in_ball && d <= r.ball_radius;
    if (in_ball && r.bounded) ++ok;
    if (r.bound > 0.0) worst = std::max(worst, r.max_weighted / r.bound);
  }
  return {ok == 10, fmt("%g of 10 starts converge in the ball with bounded weighted distance; "
                        "max ratio to K(1+2pl)||X0||*1.1 = %.3g",
                        ok, worst)};
}

Outcome reduction_agreement() {
  struct Family {
    const char* file;
    Stability expected;
  };
  const Family families[] = {{"reduce_damped_cubic.json", Stability::asymptotic},
                             {"reduce_antidamped_cubic.json", Stability::unstable},
                             {"reduce_zero.json", Stability::stable}};
  bool pass = true;
  std::ostringstream os;
  for (const auto& fam : families) {
    const auto cfg = load_config(std::string(EPCAG_CONFIG_DIR) + "/" + fam.file);
    const auto sched = make_schedule(cfg.schedule.kind, cfg.schedule.params);
    const auto sys = make_catalog_system(cfg.system.nonlinearity, cfg.system.params, cfg.system.a);
    const auto split = spectral_split(sys.a());
    const auto bundle = compute_constants(sys.a(), split, sched, sys.lipschitz(), 0.5 * split.sigma);
    ManifoldBuilder builder(sys, sched, split, bundle, cfg.manifold.options);
    GCache cache(builder, cfg.manifold.cache);
    const double P = estimate_P(builder, cfg.manifold.t0, cfg.manifold.lipschitz_pairs, cfg.seed,
                                cfg.manifold.cache.box);
    const auto r = reduction_check(
        builder, [&](double t, const Vector& v) { return cache(t, v); }, P, cfg.stability);
    const bool ok = r.agree && coarse(r.full.classification) == fam.expected;
    pass = pass && ok;
    os << cfg.system.nonlinearity << (cfg.system.params.count("s") && cfg.system.params.at("s") < 0 ? "(anti)" : "")
       << " full=" << to_string(r.full.classification)
       << " reduced=" << to_string(r.reduced.classification) << (ok ? "" : " MISMATCH") << "; ";
  }
  return {pass, os.str()};
}

Outcome integrator_order() {
  const auto sched = alternating(0, 2);
  const auto sys = example1_system();
  const double z = 0.5, exact = oracle::example1_at(z, 1.0);
  auto err = [&](double h) {
    const Vector w = Vector::Constant(1, z);
    return std::abs(integrate_interval(sys, sched, 0, 0.0, w, w, h).back()(0) - exact);
  };
  const double e1 = err(0.1), e2 = err(0.05);
  const double ratio = e1 / e2;
  return {ratio >= 12.0 && ratio <= 20.0,
          fmt("error %.3g at h = 0.1, %.3g at h = 0.05, ratio %.3f (band [12, 20])", e1, e2, ratio)};
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  criterion(1, "EPCA oracle equivalence", epca_oracle);
  criterion(2, "Example 1 backward non-uniqueness", example1_backward);
  criterion(3, "Contraction-rate property", contraction_rate);
  criterion(4, "Stable-manifold decay", stable_decay);
  criterion(5, "Manifold graph properties", graph_properties);
  criterion(6, "Surface invariance defect", invariance);
  criterion(7, "Asymptotic phase", asymptotic_phase_bound);
  criterion(8, "Reduction Principle agreement", reduction_agreement);
  criterion(9, "Order-4 integrator convergence", integrator_order);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of 9 criteria passed in %.1f s\n", 9 - failures, secs);
  return failures == 0 ? 0 : 1;
}
