// Compares the serial reference kernels against the OpenMP kernels on
// representative layer shapes, plus a whole-model forward pass.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cascnn/kernels.hpp"
#include "cascnn/kernels_ref.hpp"
#include "cascnn/model.hpp"

using namespace cascnn;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (float& x : v) x = dist(rng);
    return v;
}

// One encoder-interior conv shape at desk scale: 32 -> 32 channels, 24x24.
constexpr int N = 1, C = 32, H = 24, W = 24;

void bench_conv2d_serial(benchmark::State& state) {
    auto x = random_vec(size_t(N) * C * H * W, 1);
    auto w = random_vec(size_t(C) * C * 9, 2);
    auto b = random_vec(C, 3);
    std::vector<float> y(size_t(N) * C * H * W);
    for (auto _ : state) {
        ref::conv2d(x.data(), w.data(), b.data(), y.data(), N, C, C, H, W);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bench_conv2d_serial);

void bench_conv2d_openmp(benchmark::State& state) {
    auto x = random_vec(size_t(N) * C * H * W, 1);
    auto w = random_vec(size_t(C) * C * 9, 2);
    auto b = random_vec(C, 3);
    std::vector<float> y(size_t(N) * C * H * W);
    for (auto _ : state) {
        kernels::conv2d(x.data(), w.data(), b.data(), y.data(), N, C, C, H, W);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bench_conv2d_openmp);

void bench_tconv2d_serial(benchmark::State& state) {
    auto x = random_vec(size_t(N) * C * H * W, 4);
    auto w = random_vec(size_t(C) * C * 16, 5);
    auto b = random_vec(C, 6);
    std::vector<float> y(size_t(N) * C * 4 * H * W);
    for (auto _ : state) {
        ref::tconv2d(x.data(), w.data(), b.data(), y.data(), N, C, C, H, W);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bench_tconv2d_serial);

void bench_tconv2d_openmp(benchmark::State& state) {
    auto x = random_vec(size_t(N) * C * H * W, 4);
    auto w = random_vec(size_t(C) * C * 16, 5);
    auto b = random_vec(C, 6);
    std::vector<float> y(size_t(N) * C * 4 * H * W);
    for (auto _ : state) {
        kernels::tconv2d(x.data(), w.data(), b.data(), y.data(), N, C, C, H, W);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bench_tconv2d_openmp);

void bench_avg_pool_serial(benchmark::State& state) {
    auto x = random_vec(size_t(N) * C * H * W, 7);
    std::vector<float> y(size_t(N) * C * H * W / 4);
    for (auto _ : state) {
        ref::avg_pool_2x2(x.data(), y.data(), N, C, H, W);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bench_avg_pool_serial);

void bench_avg_pool_openmp(benchmark::State& state) {
    auto x = random_vec(size_t(N) * C * H * W, 7);
    std::vector<float> y(size_t(N) * C * H * W / 4);
    for (auto _ : state) {
        kernels::avg_pool_2x2(x.data(), y.data(), N, C, H, W);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(bench_avg_pool_openmp);

void bench_forward_width_1_8(benchmark::State& state) {
    CasCnnModel model = CasCnnModel::build(1, 8);
    model.init_weights(1);
    Tensor x({1, 1, 48, 48});
    auto v = random_vec(x.data.size(), 8);
    x.data = std::move(v);
    for (auto _ : state) {
        Tape tape;
        auto out = model.forward(tape, tape.leaf(x));
        benchmark::DoNotOptimize(tape.value(out.y_full).data.data());
    }
}
BENCHMARK(bench_forward_width_1_8);

}  // namespace

BENCHMARK_MAIN();
