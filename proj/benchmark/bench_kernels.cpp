// Compares the OpenMP kernels against their serial references. Not part of
// ctest; build and run the bench_kernels target directly.

#include <benchmark/benchmark.h>

#include "featgen/matrix.hpp"
#include "featgen/mmd.hpp"
#include "featgen/rng.hpp"

namespace {

featgen::Matrix random_matrix(std::size_t rows, std::size_t cols,
                              std::uint64_t seed) {
  featgen::Rng rng(seed);
  featgen::Matrix m(rows, cols);
  for (auto& v : m.raw()) v = rng.next_double();
  return m;
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const featgen::Matrix a = random_matrix(n, n, 1);
  const featgen::Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(featgen::matmul(a, b));
}

void BM_matmul_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const featgen::Matrix a = random_matrix(n, n, 1);
  const featgen::Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(featgen::matmul_serial(a, b));
}

void BM_gram(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const featgen::Matrix x = random_matrix(n, 32, 3);
  const featgen::Matrix y = random_matrix(n, 32, 4);
  const featgen::KernelSpec kernel;
  for (auto _ : state) benchmark::DoNotOptimize(featgen::gram(x, y, kernel));
}

void BM_gram_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const featgen::Matrix x = random_matrix(n, 32, 3);
  const featgen::Matrix y = random_matrix(n, 32, 4);
  const featgen::KernelSpec kernel;
  for (auto _ : state)
    benchmark::DoNotOptimize(featgen::gram_serial(x, y, kernel));
}

}  // namespace

BENCHMARK(BM_matmul)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_gram)->Arg(64)->Arg(256);
BENCHMARK(BM_gram_serial)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
