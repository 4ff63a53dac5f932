#include <benchmark/benchmark.h>

#include <random>

#include "sarreg/pipeline.hpp"

using namespace sarreg;

namespace {

void BM_Describe(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Plane img = to_plane(render_texture(Texture::fractal, 1, side, side));
  const MatchParams params;
  for (auto _ : state) benchmark::DoNotOptimize(describe(img, params));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Describe)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_PhaseCorrelate(benchmark::State& state) {
  const MatchParams params;
  const auto t = describe(to_plane(render_texture(Texture::fractal, 2, 100, 100)), params);
  const auto s = describe(to_plane(render_texture(Texture::fractal, 2, 200, 200, -50, -50)), params);
  for (auto _ : state) benchmark::DoNotOptimize(phase_correlate_3d(t, s));
}
BENCHMARK(BM_PhaseCorrelate)->Unit(benchmark::kMillisecond);

void BM_MatchPoint(benchmark::State& state) {
  const auto data = generate(SynthSpec::translation(400, 5, 3, 3));
  const InterestPoint pt{200, 200, 0.0};
  const MatchParams params;
  for (auto _ : state) benchmark::DoNotOptimize(match_point(pt, data.reference, data.sensed, params));
}
BENCHMARK(BM_MatchPoint)->Unit(benchmark::kMillisecond);

void BM_BlockFast(benchmark::State& state) {
  const auto img = render_texture(Texture::blobs, 4, 1024, 1024);
  BlockGridParams params;
  for (auto _ : state) benchmark::DoNotOptimize(detect_block_fast(img, params, 1));
}
BENCHMARK(BM_BlockFast)->Unit(benchmark::kMillisecond);

std::vector<ControlPoint> bench_points(std::size_t n) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 20000.0), z(0.0, 200.0);
  std::vector<ControlPoint> cps;
  for (std::size_t i = 0; i < n; ++i) {
    const double X = u(rng), Y = u(rng);
    cps.push_back({X, Y, z(rng), X + 30 + 1e-6 * X * Y, Y - 20 + 1e-9 * X * X * X / 1e3});
  }
  return cps;
}

void BM_Fit(benchmark::State& state) {
  const auto spec = all_models()[static_cast<std::size_t>(state.range(0))];
  const auto cps = bench_points(95);
  for (auto _ : state) benchmark::DoNotOptimize(fit(spec, cps));
  state.SetLabel(spec.name());
}
BENCHMARK(BM_Fit)->Arg(2)->Arg(7)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_Sweep(benchmark::State& state) {
  const auto cps = bench_points(143);
  const std::vector<int> counts = {25, 35, 45, 55, 65, 75, 85, 95};
  for (auto _ : state) benchmark::DoNotOptimize(sweep(all_models(), cps, 48, counts, 1, 10.0, 1));
}
BENCHMARK(BM_Sweep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
