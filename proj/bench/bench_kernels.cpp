// OpenMP kernels vs the serial reference. Run with --benchmark_filter=... and
// OMP_NUM_THREADS to vary the worker count.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "blipcdf/estimator.hpp"
#include "blipcdf/serial_reference.hpp"

namespace {

using namespace blipcdf;

struct Fixture {
  std::vector<double> b, q0, q1, g1, y, psi;
  std::vector<int> a;
  SmoothingSpec spec;

  explicit Fixture(std::size_t n) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    for (std::size_t i = 0; i < n; ++i) {
      q0.push_back(u(rng));
      q1.push_back(u(rng));
      g1.push_back(u(rng));
      a.push_back(u(rng) < 0.5);
      y.push_back(u(rng) < 0.5 ? 0.0 : 1.0);
      b.push_back(q1.back() - q0.back());
    }
    spec.kernel = build_kernel(4, 1.0);
    spec.delta = 0.7;
    spec.t = {-0.145, -0.085, -0.025, 0.035, 0.095, 0.155, 0.215, 0.275};
    psi = serial::smoothed_cdf_plugin(b, spec);
  }
};

void BM_PluginParallel(benchmark::State& st) {
  const Fixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(smoothed_cdf_plugin(f.b, f.spec));
}

void BM_PluginSerial(benchmark::State& st) {
  const Fixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(serial::smoothed_cdf_plugin(f.b, f.spec));
}

void BM_EicParallel(benchmark::State& st) {
  const Fixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(eic(f.b, f.q0, f.q1, f.g1, f.a, f.y, f.psi, f.spec));
}

void BM_EicSerial(benchmark::State& st) {
  const Fixture f(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(serial::eic(f.b, f.q0, f.q1, f.g1, f.a, f.y, f.psi, f.spec));
}

}  // namespace

BENCHMARK(BM_PluginParallel)->Arg(1000)->Arg(100000);
BENCHMARK(BM_PluginSerial)->Arg(1000)->Arg(100000);
BENCHMARK(BM_EicParallel)->Arg(1000)->Arg(100000);
BENCHMARK(BM_EicSerial)->Arg(1000)->Arg(100000);

BENCHMARK_MAIN();
