// Serial reference against the OpenMP batch kernels.

#include "endo/kernels.hpp"
#include "endo/reference.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace endo;

namespace {

struct Fixture {
  std::vector<double> x1, x2, d, y, points;
  smooth::SmootherConfig config;

  explicit Fixture(std::size_t n) : x1(n), x2(n), d(n), y(n) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (std::size_t i = 0; i < n; ++i) {
      x1[i] = g(rng);
      x2[i] = g(rng);
      d[i] = 0.5 * x1[i] + g(rng);
      y[i] = d[i] * (1.0 + 0.25 * x2[i]) + x1[i] * x1[i] + g(rng);
    }
    for (std::size_t p = 0; p < 256; ++p) {
      points.push_back(g(rng));
      points.push_back(g(rng));
    }
    config.bandwidths = {0.4, 0.4};
  }

  smooth::Columns regressors() const { return {d, x1}; }
};

const Fixture& fixture(std::size_t n) {
  static const Fixture small(2000), large(8000);
  return n <= 2000 ? small : large;
}

void fit_points_serial(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::fit_points(f.regressors(), f.y, f.points, f.config));
}

void fit_points_parallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::fit_points(f.regressors(), f.y, f.points, f.config));
}

void cdf_rows_serial(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  smooth::SmootherConfig c;
  c.bandwidths = {0.3, 0.3, 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(reference::conditional_cdf_at_rows(f.d, {f.x1, f.x2}, c));
}

void cdf_rows_parallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  smooth::SmootherConfig c;
  c.bandwidths = {0.3, 0.3, 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::conditional_cdf_at_rows(f.d, {f.x1, f.x2}, c));
}

void loo_serial(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::loo_squared_error(f.regressors(), f.y, f.config));
}

void loo_parallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::loo_squared_error(f.regressors(), f.y, f.config));
}

} // namespace

BENCHMARK(fit_points_serial)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(fit_points_parallel)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(cdf_rows_serial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(cdf_rows_parallel)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(loo_serial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(loo_parallel)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
