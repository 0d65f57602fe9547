// Serial reference vs. OpenMP kernels on the shapes the trainer actually
// touches (feature extraction over a full world, per-batch linear algebra,
// clustering-scale gram and neighbor scans).

#include <benchmark/benchmark.h>

#include <string>
#include <utility>
#include <vector>

#include "rsiam/kernels.hpp"
#include "rsiam/rng.hpp"
#include "rsiam/types.hpp"

using namespace rsiam;

namespace {

RealMatrix random_matrix(std::uint64_t seed, std::size_t r, std::size_t c) {
    Rng rng(seed);
    RealMatrix m(r, c);
    for (double& x : m.data) x = rng.gaussian();
    return m;
}

RealMatrix random_unit_rows(std::uint64_t seed, std::size_t r, std::size_t c) {
    RealMatrix m = random_matrix(seed, r, c);
    RealMatrix out;
    kernels::normalize_rows(m, out, 1e-12);
    return out;
}

void bench_normalize(benchmark::State& state, bool parallel) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const RealMatrix m = random_matrix(1, n, d);
    RealMatrix out;
    for (auto _ : state) {
        if (parallel)
            kernels::normalize_rows(m, out, 1e-12);
        else
            kernels::serial::normalize_rows(m, out, 1e-12);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * d));
}

void bench_linear_forward(benchmark::State& state, bool parallel) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const std::size_t d_out = 2 * d;
    const RealMatrix x = random_matrix(2, n, d);
    const RealMatrix w = random_matrix(3, d_out, d);
    const RealVector b(d_out, 0.1);
    RealMatrix out;
    for (auto _ : state) {
        if (parallel)
            kernels::linear_forward(x, w, b, out);
        else
            kernels::serial::linear_forward(x, w, b, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * d * d_out));
}

void bench_gram(benchmark::State& state, bool parallel) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const RealMatrix u = random_unit_rows(4, n, d);
    RealMatrix s;
    for (auto _ : state) {
        if (parallel)
            kernels::cosine_gram(u, s);
        else
            kernels::serial::cosine_gram(u, s);
        benchmark::DoNotOptimize(s.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * d / 2));
}

void bench_neighbors(benchmark::State& state, bool parallel) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const RealMatrix u = random_unit_rows(5, n, d);
    std::vector<int> kappa;
    for (auto _ : state) {
        if (parallel)
            kernels::nearest_neighbors(u, kappa);
        else
            kernels::serial::nearest_neighbors(u, kappa);
        benchmark::DoNotOptimize(kappa.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n * n * d));
}

void bench_cross(benchmark::State& state, bool parallel) {
    const auto b = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const std::size_t slots = 8 * b;
    const RealMatrix z = random_unit_rows(6, b, d);
    const RealMatrix m = random_unit_rows(7, slots, d);
    RealMatrix s;
    for (auto _ : state) {
        if (parallel)
            kernels::cross_similarities(z, m, s);
        else
            kernels::serial::cross_similarities(z, m, s);
        benchmark::DoNotOptimize(s.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(b * slots * d));
}

using Shape = std::pair<int, int>;

void register_pair(const char* name, void (*fn)(benchmark::State&, bool),
                   const std::vector<Shape>& shapes) {
    for (const Shape& shape : shapes) {
        benchmark::RegisterBenchmark((std::string(name) + "/serial").c_str(), fn, false)
            ->Args({shape.first, shape.second});
        benchmark::RegisterBenchmark((std::string(name) + "/omp").c_str(), fn, true)
            ->Args({shape.first, shape.second});
    }
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Shape> wide = {{80, 32}, {512, 64}, {1024, 96}};
    const std::vector<Shape> batch = {{16, 32}, {64, 64}, {128, 96}};
    register_pair("normalize_rows", bench_normalize, wide);
    register_pair("linear_forward", bench_linear_forward, batch);
    register_pair("cosine_gram", bench_gram, wide);
    register_pair("nearest_neighbors", bench_neighbors, wide);
    register_pair("cross_similarities", bench_cross, batch);
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
