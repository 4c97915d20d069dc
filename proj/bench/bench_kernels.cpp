#include "offgrid/parallel_kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::vector<double> v(n);
    for (auto& x : v) x = N(rng);
    return v;
}

template <double (*F)(const double*, const double*, const double*, std::size_t)>
void BM_weighted_dot(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto w = random_vector(n, 1), f = random_vector(n, 2), g = random_vector(n, 3);
    for (auto _ : st) benchmark::DoNotOptimize(F(w.data(), f.data(), g.data(), n));
    st.SetItemsProcessed(st.iterations() * n);
}

template <void (*F)(const double*, std::size_t, std::size_t, const double*, double*)>
void BM_row_dots(benchmark::State& st) {
    const auto m = static_cast<std::size_t>(st.range(0)), n = static_cast<std::size_t>(st.range(1));
    const auto rows = random_vector(m * n, 4), v = random_vector(n, 5);
    std::vector<double> out(m);
    for (auto _ : st) {
        F(rows.data(), m, n, v.data(), out.data());
        benchmark::DoNotOptimize(out.data());
    }
    st.SetItemsProcessed(st.iterations() * m * n);
}

template <std::size_t (*F)(const double*, std::size_t)>
void BM_argmax(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    const auto x = random_vector(n, 6);
    for (auto _ : st) benchmark::DoNotOptimize(F(x.data(), n));
    st.SetItemsProcessed(st.iterations() * n);
}

}  // namespace

using namespace offgrid::kernels;

BENCHMARK(BM_weighted_dot<weighted_dot_serial>)->Name("weighted_dot/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(BM_weighted_dot<weighted_dot_omp>)->Name("weighted_dot/omp")->Range(1 << 10, 1 << 20);
BENCHMARK(BM_row_dots<row_dots_serial>)->Name("row_dots/serial")->Args({200, 1024})->Args({1000, 8192});
BENCHMARK(BM_row_dots<row_dots_omp>)->Name("row_dots/omp")->Args({200, 1024})->Args({1000, 8192});
BENCHMARK(BM_argmax<argmax_abs_serial>)->Name("argmax_abs/serial")->Range(1 << 10, 1 << 20);
BENCHMARK(BM_argmax<argmax_abs_omp>)->Name("argmax_abs/omp")->Range(1 << 10, 1 << 20);

BENCHMARK_MAIN();
