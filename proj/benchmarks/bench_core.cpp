#include "epcag/analysis.hpp"
#include "epcag/catalog.hpp"
#include "epcag/manifolds.hpp"
#include "epcag/solver.hpp"

#include <benchmark/benchmark.h>

using namespace epcag;

namespace {

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

void BM_SolveForward(benchmark::State& state) {
  const auto sched = epca(0, 100);
  const auto sys = make_catalog_system("tanh-coupled", {{"eps", 0.05}}, diag2(-1.0, -0.5));
  const SolverOptions opt{.step = 1.0 / static_cast<double>(state.range(0))};
  for (auto _ : state) {
    auto tr = solve_forward(sys, sched, 0.0, Vector::Ones(2), 100.0, opt);
    benchmark::DoNotOptimize(tr);
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SolveForward)->Arg(10)->Arg(100);

void BM_SpectralSplit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Matrix a = Matrix::Random(n, n) * 0.3;
  a.topLeftCorner(n / 2, n / 2) -= 2.0 * Matrix::Identity(n / 2, n / 2);
  a.rightCols(n - n / 2).setZero();
  a.bottomRows(n - n / 2).setZero();
  for (auto _ : state) benchmark::DoNotOptimize(spectral_split(a));
}
BENCHMARK(BM_SpectralSplit)->Arg(4)->Arg(16);

struct TanhManifold {
  ArgumentSchedule sched = epca(-150, 150);
  HybridSystem sys = make_catalog_system("tanh-coupled", {{"eps", 0.01}}, diag2(-1.0, 0.0));
  SpectralSplit split = spectral_split(sys.a());
  ConstantsBundle bundle = compute_constants(sys.a(), split, sched, sys.lipschitz(), 0.25);
  ManifoldBuilder builder{sys, sched, split, bundle};
};

void BM_EvalF(benchmark::State& state) {
  TanhManifold m;
  for (auto _ : state) benchmark::DoNotOptimize(m.builder.eval_F(0.0, Vector::Constant(1, 0.7)));
}
BENCHMARK(BM_EvalF)->Unit(benchmark::kMillisecond);

void BM_EvalG(benchmark::State& state) {
  TanhManifold m;
  for (auto _ : state) benchmark::DoNotOptimize(m.builder.eval_G(0.0, Vector::Constant(1, 0.7)));
}
BENCHMARK(BM_EvalG)->Unit(benchmark::kMillisecond);

void BM_GCacheLookup(benchmark::State& state) {
  TanhManifold m;
  GCache cache(m.builder, {});
  cache(0.0, Vector::Constant(1, 0.1));
  double t = 0.0;
  for (auto _ : state) {
    t += 0.37;
    if (t > 100.0) t = 0.0;
    benchmark::DoNotOptimize(cache(t, Vector::Constant(1, 0.33)));
  }
}
BENCHMARK(BM_GCacheLookup);

}  // namespace
BENCHMARK_MAIN();
