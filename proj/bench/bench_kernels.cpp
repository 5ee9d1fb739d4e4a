// Serial reference vs OpenMP kernels. Arguments: rows, threads.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "emgnn/kernels.hpp"

using namespace emgnn;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(r, c);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

// Random graph with about `degree` neighbors per row plus a self-loop.
SparseStructure random_graph(std::size_t n, std::size_t degree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<std::size_t>> rows(n);
    for (std::size_t r = 0; r < n; ++r) {
        rows[r].push_back(r);
        for (std::size_t k = 0; k < degree; ++k) rows[r].push_back(pick(rng));
        std::sort(rows[r].begin(), rows[r].end());
        rows[r].erase(std::unique(rows[r].begin(), rows[r].end()), rows[r].end());
    }
    return SparseStructure(n, rows);
}

template <bool Parallel>
void BM_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    kernels::set_num_threads(static_cast<int>(state.range(1)));
    const Tensor a = random_tensor(n, 64, 1), b = random_tensor(64, 64, 2);
    Tensor out(n, 64);
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::matmul(a, b, out);
        else kernels::serial::matmul(a, b, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 64));
}

template <bool Parallel>
void BM_matmul_tn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    kernels::set_num_threads(static_cast<int>(state.range(1)));
    const Tensor a = random_tensor(n, 64, 1), b = random_tensor(n, 64, 2);
    Tensor out(64, 64);
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::matmul_tn(a, b, out);
        else kernels::serial::matmul_tn(a, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <bool Parallel>
void BM_spmm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    kernels::set_num_threads(static_cast<int>(state.range(1)));
    const SparseStructure s = random_graph(n, 10, 3);
    const std::vector<double> w(s.nnz(), 0.1);
    const Tensor h = random_tensor(n, 64, 4);
    Tensor out(n, 64);
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::spmm(s, w, h, out);
        else kernels::serial::spmm(s, w, h, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <bool Parallel>
void BM_spmm_grad_h(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    kernels::set_num_threads(static_cast<int>(state.range(1)));
    const SparseStructure s = random_graph(n, 10, 3);
    const std::vector<double> w(s.nnz(), 0.1);
    const Tensor g = random_tensor(n, 64, 5);
    Tensor dh(n, 64);
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::spmm_grad_h(s, w, g, dh);
        else kernels::serial::spmm_grad_h(s, w, g, dh);
        benchmark::DoNotOptimize(dh.data());
    }
}

template <bool Parallel>
void BM_spmm_grad_w(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    kernels::set_num_threads(static_cast<int>(state.range(1)));
    const SparseStructure s = random_graph(n, 10, 3);
    const Tensor g = random_tensor(n, 64, 5), h = random_tensor(n, 64, 6);
    std::vector<double> dw(s.nnz());
    for (auto _ : state) {
        if constexpr (Parallel) kernels::omp::spmm_grad_w(s, g, h, dw);
        else kernels::serial::spmm_grad_w(s, g, h, dw);
        benchmark::DoNotOptimize(dw.data());
    }
}

void sizes_serial(benchmark::internal::Benchmark* b) {
    for (int n : {2000, 20000}) b->Args({n, 1});
}

void sizes_parallel(benchmark::internal::Benchmark* b) {
    for (int n : {2000, 20000})
        for (int t : {1, 2, 4, 8}) b->Args({n, t});
}

}  // namespace

BENCHMARK(BM_matmul<false>)->Apply(sizes_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_matmul<true>)->Apply(sizes_parallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_matmul_tn<false>)->Apply(sizes_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_matmul_tn<true>)->Apply(sizes_parallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_spmm<false>)->Apply(sizes_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_spmm<true>)->Apply(sizes_parallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_spmm_grad_h<false>)->Apply(sizes_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_spmm_grad_h<true>)->Apply(sizes_parallel)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_spmm_grad_w<false>)->Apply(sizes_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_spmm_grad_w<true>)->Apply(sizes_parallel)->Unit(benchmark::kMicrosecond)->UseRealTime();

BENCHMARK_MAIN();
