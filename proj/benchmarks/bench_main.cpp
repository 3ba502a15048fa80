#include <benchmark/benchmark.h>

#include "mcbound/annealing.hpp"
#include "mcbound/ar_model.hpp"
#include "mcbound/bounds.hpp"
#include "mcbound/chain_model.hpp"
#include "mcbound/coupling.hpp"
#include "mcbound/quadrature.hpp"

namespace {

using namespace mcbound;

void BM_BoundCurve(benchmark::State& state) {
  const bounds::HomogeneousBoundInput in{0.3, 0.9, 1.0, 1.2, 5.0};
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bounds::bound_curve(in, 1, n));
}
BENCHMARK(BM_BoundCurve)->Arg(50)->Arg(500);

void BM_RunCoupling(benchmark::State& state) {
  const auto k = FiniteKernel::from_rows({{0.5, 0.3, 0.2}, {0.2, 0.5, 0.3}, {0.1, 0.3, 0.6}});
  const auto cfg = coupling::homogeneous_config(k, extract_minorization(k, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}), 1);
  Measure xi = Measure::Zero(3), xp = Measure::Zero(3);
  xi(0) = 1.0;
  xp(2) = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(coupling::run_coupling(cfg, xi, xp, 20, 10000));
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_RunCoupling)->Unit(benchmark::kMillisecond);

void BM_PathBasisIdentity(benchmark::State& state) {
  const auto k = FiniteKernel::from_rows({{0.5, 0.3, 0.2}, {0.2, 0.5, 0.3}, {0.1, 0.3, 0.6}});
  const auto cfg = coupling::homogeneous_config(k, extract_minorization(k, {{0, 1}, {1, 2}}), 1);
  Measure xi = Measure::Constant(3, 1.0 / 3.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(coupling::path_basis_identity_check(cfg, xi, xi, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_PathBasisIdentity)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Integrate(benchmark::State& state) {
  const auto fn = [](double x) { return std::exp(-x * x) * std::abs(std::sin(3 * x)); };
  for (auto _ : state) benchmark::DoNotOptimize(integrate(fn, -8.0, 8.0, 1e-10));
}
BENCHMARK(BM_Integrate);

void BM_KvRatio(benchmark::State& state) {
  const auto f = anneal::Objective::doublewell();
  const auto q = anneal::Proposal::gaussian(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(anneal::kv_ratio(f, q, 1.7, 8.0, 2.0));
}
BENCHMARK(BM_KvRatio);

void BM_ArCoupledStep(benchmark::State& state) {
  ar::ARModel m{ar::MapFunction::linear(0.5), ar::NoiseDensity::gaussian(1.0), 4.0, 0.8};
  const ar::ARCoupling c(m);
  Stream rng(1, 0);
  const ar::ARState inside{0.0, 2.0, false}, outside{0.0, 9.0, false};
  const ar::ARState start = state.range(0) ? inside : outside;
  for (auto _ : state) benchmark::DoNotOptimize(c.coupled_step(start, rng));
}
BENCHMARK(BM_ArCoupledStep)->Arg(0)->Arg(1);

void BM_RwmhStep(benchmark::State& state) {
  const auto f = anneal::Objective::doublewell();
  const auto q = anneal::Proposal::gaussian(1.0);
  Stream rng(2, 0);
  double x = 0.5;
  for (auto _ : state) {
    x = anneal::rwmh_step(f, q, x, 5.0, rng);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_RwmhStep);

}  // namespace

BENCHMARK_MAIN();
