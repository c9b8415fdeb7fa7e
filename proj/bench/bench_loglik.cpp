// Serial reference vs OpenMP kernels on the same data and coefficients.
// Thread count follows OMP_NUM_THREADS.

#include <map>

#include <benchmark/benchmark.h>

#include "esag/regression.hpp"
#include "esag/simulation.hpp"

namespace {

struct Fixture {
  esag::Dataset data;
  esag::RegressionCoefficients coeffs;
};

const Fixture& fixture(int n) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    const auto dgm = esag::make_dgm("V2", 0.4);
    Fixture f{esag::generate_dgm(dgm, n, 1), dgm.coefficients};
    it = cache.emplace(n, std::move(f)).first;
  }
  return it->second;
}

void BM_Loglik(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(esag::loglik(f.coeffs, f.data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LoglikSerial(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(esag::loglik_serial(f.coeffs, f.data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LoglikGrad(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  esag::Vector grad;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        esag::loglik_grad(f.coeffs, f.data, esag::NullSpec::unrestricted(), grad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LoglikGradSerial(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  esag::Vector grad;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        esag::loglik_grad_serial(f.coeffs, f.data, esag::NullSpec::unrestricted(), grad));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Loglik)->Arg(200)->Arg(2000)->Arg(20000);
BENCHMARK(BM_LoglikSerial)->Arg(200)->Arg(2000)->Arg(20000);
BENCHMARK(BM_LoglikGrad)->Arg(200)->Arg(2000)->Arg(20000);
BENCHMARK(BM_LoglikGradSerial)->Arg(200)->Arg(2000)->Arg(20000);

BENCHMARK_MAIN();
