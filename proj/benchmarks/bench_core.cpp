#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "noisereg/averaging.hpp"
#include "noisereg/fields.hpp"
#include "noisereg/germ_bank.hpp"
#include "noisereg/occupation.hpp"
#include "noisereg/paths.hpp"
#include "noisereg/sewing.hpp"
#include "noisereg/solver.hpp"

using namespace noisereg;

namespace {

double reach_of(const Path& p) {
  double r = 0.0;
  for (double v : p.values) r = std::max(r, std::abs(v));
  return r;
}

void BM_FbmSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const FbmGenerator gen(0.2, 1, TimeGrid(1.0, n));
  std::uint64_t stream = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen.sample(1, stream++));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FbmSample)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity(benchmark::oNLogN);

void BM_LocalTime(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = generate_fbm(0.25, 1, TimeGrid(1.0, n), 3).path;
  const double h = 1.0 / 1024.0;
  const auto grid = SpatialGrid::covering(1, reach_of(w) + h, h);
  for (auto _ : state) benchmark::DoNotOptimize(local_time(w, grid, 0.0, 1.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LocalTime)->Arg(1 << 10)->Arg(1 << 14);

void BM_AverageViaLocalTime(benchmark::State& state) {
  const auto w = generate_fbm(0.1, 1, TimeGrid(1.0, 1 << 14), 4).path;
  const double h = 1.0 / static_cast<double>(state.range(0));
  const auto L = local_time(w, SpatialGrid::covering(1, reach_of(w) + h, h), 0.0, 1.0);
  const ScalarFunction f = [](std::span<const double> x) { return std::abs(x[0]) <= 0.5 ? 1.0 : 0.0; };
  const auto tab = sample_on_grid(f, SpatialGrid::covering(1, 1.0, h));
  for (auto _ : state) benchmark::DoNotOptimize(average_via_local_time(tab, L));
}
BENCHMARK(BM_AverageViaLocalTime)->Arg(256)->Arg(1024)->Arg(4096);

void BM_SewQuadratic(benchmark::State& state) {
  Germ g;
  g.eval = [](double s, double t, std::span<double> out) { out[0] = s * (t - s); };
  const int levels = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sew(g, 0.0, 1.0, levels));
}
BENCHMARK(BM_SewQuadratic)->Arg(12)->Arg(16);

void BM_Mollify(benchmark::State& state) {
  const double eps = 1.0 / static_cast<double>(state.range(0));
  const auto sigma = singular_example(0.4, 1.0, 1);
  const auto grid = SpatialGrid::covering(1, 1.0 + eps, 1.0 / 1024.0);
  for (auto _ : state) benchmark::DoNotOptimize(mollify(sigma, MollifierSpec{eps}, grid));
}
BENCHMARK(BM_Mollify)->Arg(4)->Arg(64);

QuenchedScenario bench_scenario(std::size_t paths) {
  const TimeGrid grid(1.0, 1024);
  return QuenchedScenario{generate_fbm(0.2, 1, grid, 7), singular_example(0.4, 1.0, 1), {0.25, 0.0625},
                          1.0 / 1024.0, {0.5}, 1, paths, 11};
}

void BM_SolveEnsemble(benchmark::State& state) {
  const auto sc = bench_scenario(static_cast<std::size_t>(state.range(0)));
  const auto sigma = sc.mollified(1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_ensemble(sc, sigma));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1024);
}
BENCHMARK(BM_SolveEnsemble)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_GermBank(benchmark::State& state) {
  const auto sc = bench_scenario(static_cast<std::size_t>(state.range(0)));
  const auto sigma = sc.mollified(1);
  const auto e = solve_ensemble(sc, sigma);
  const auto grid = SpatialGrid::covering(1, 1.5, 1.0 / 1024.0);
  const LocalTimeAverager avg(sc.fbm.path, {GridFunction{grid, hs_norm_sq(sigma).sample(grid)}});
  const std::vector<double> q{1.0};
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_germs(avg, e, q));
}
BENCHMARK(BM_GermBank)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
