#include <benchmark/benchmark.h>

#include <vector>

#include "slicing/nn/kernels.hpp"
#include "slicing/rng.hpp"

namespace k = slicing::kernels;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
    slicing::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

// Encoder-sized shapes: 32x32 grayscale in, 8 channels, 2048 -> 256 dense.
template <bool Parallel>
void dense_forward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0)), in = 2048, out = 256;
    auto x = filled(batch * in, 1), w = filled(out * in, 2), b = filled(out, 3);
    std::vector<double> y(batch * out);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::dense_forward(x.data(), w.data(), b.data(), y.data(), batch, in, out);
        } else {
            k::serial::dense_forward(x.data(), w.data(), b.data(), y.data(), batch, in, out);
        }
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}

template <bool Parallel>
void dense_backward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0)), in = 2048, out = 256;
    auto x = filled(batch * in, 1), w = filled(out * in, 2), dy = filled(batch * out, 3);
    std::vector<double> dx(batch * in), dw(out * in), db(out);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::dense_backward_params(dy.data(), x.data(), dw.data(), db.data(), batch, in, out);
            k::omp::dense_backward_input(dy.data(), w.data(), dx.data(), batch, in, out);
        } else {
            k::serial::dense_backward_params(dy.data(), x.data(), dw.data(), db.data(), batch, in, out);
            k::serial::dense_backward_input(dy.data(), w.data(), dx.data(), batch, in, out);
        }
        benchmark::DoNotOptimize(dx.data());
        benchmark::DoNotOptimize(dw.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}

template <bool Parallel>
void conv_forward(benchmark::State& state) {
    k::ConvGeom g{static_cast<std::size_t>(state.range(0)), 1, 32, 32, 8, 3, 2, 1};
    auto x = filled(g.batch * 32 * 32, 1), w = filled(8 * 9, 2), b = filled(8, 3);
    std::vector<double> y(g.batch * 8 * g.out_h() * g.out_w());
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::conv2d_forward(x.data(), w.data(), b.data(), y.data(), g);
        } else {
            k::serial::conv2d_forward(x.data(), w.data(), b.data(), y.data(), g);
        }
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.batch));
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
    k::ConvGeom g{static_cast<std::size_t>(state.range(0)), 1, 32, 32, 8, 3, 2, 1};
    auto x = filled(g.batch * 32 * 32, 1), w = filled(8 * 9, 2);
    auto dy = filled(g.batch * 8 * g.out_h() * g.out_w(), 3);
    std::vector<double> dx(x.size()), dw(w.size()), db(8);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::conv2d_backward_params(dy.data(), x.data(), dw.data(), db.data(), g);
            k::omp::conv2d_backward_input(dy.data(), w.data(), dx.data(), g);
        } else {
            k::serial::conv2d_backward_params(dy.data(), x.data(), dw.data(), db.data(), g);
            k::serial::conv2d_backward_input(dy.data(), w.data(), dx.data(), g);
        }
        benchmark::DoNotOptimize(dx.data());
        benchmark::DoNotOptimize(dw.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.batch));
}

template <bool Parallel>
void adam(benchmark::State& state) {
    const std::size_t n = 2048 * 256;
    auto p = filled(n, 1), grad = filled(n, 2);
    std::vector<double> m(n, 0.0), v(n, 0.0);
    const k::AdamCoeffs c{1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001};
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::omp::adam_update(p.data(), grad.data(), m.data(), v.data(), n, c);
        } else {
            k::serial::adam_update(p.data(), grad.data(), m.data(), v.data(), n, c);
        }
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

}  // namespace

BENCHMARK(dense_forward<false>)->Name("dense_forward/serial")->Arg(1)->Arg(16)->Arg(64);
BENCHMARK(dense_forward<true>)->Name("dense_forward/omp")->Arg(1)->Arg(16)->Arg(64);
BENCHMARK(dense_backward<false>)->Name("dense_backward/serial")->Arg(16)->Arg(64);
BENCHMARK(dense_backward<true>)->Name("dense_backward/omp")->Arg(16)->Arg(64);
BENCHMARK(conv_forward<false>)->Name("conv_forward/serial")->Arg(16)->Arg(64);
BENCHMARK(conv_forward<true>)->Name("conv_forward/omp")->Arg(16)->Arg(64);
BENCHMARK(conv_backward<false>)->Name("conv_backward/serial")->Arg(16)->Arg(64);
BENCHMARK(conv_backward<true>)->Name("conv_backward/omp")->Arg(16)->Arg(64);
BENCHMARK(adam<false>)->Name("adam/serial");
BENCHMARK(adam<true>)->Name("adam/omp");

BENCHMARK_MAIN();
