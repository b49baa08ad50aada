// Times the production (OpenMP) kernels against the serial reference
// implementations and reports a full model forward/backward pass.
#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mambaio/kernels.hpp"
#include "mambaio/model.hpp"
#include "mambaio/reference.hpp"

using namespace mambaio;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

Tensor<float> randn(Rng& rng, std::vector<int> shape) {
    Tensor<float> t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
    return t;
}

void row(const char* name, double serial_s, double parallel_s) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_s * 1e3, parallel_s * 1e3,
                serial_s / parallel_s);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    Rng rng(1234);
    {
        auto x = randn(rng, {128, 400});
        auto w = randn(rng, {256, 128});
        auto b = randn(rng, {256});
        Tensor<float> y({256, 400});
        const double ts = time_best_of(20, [&] { (void)ref::pointwise_conv(x, w, b.data(), 1); });
        const double tp =
            time_best_of(20, [&] { kernels::pointwise_conv(y, x, w, b.data(), 1); });
        row("pointwise_conv 128->256", ts, tp);
    }
    {
        auto x = randn(rng, {256, 400});
        auto k = randn(rng, {256, 7});
        Tensor<float> y({256, 400});
        const double ts = time_best_of(20, [&] { (void)ref::depthwise_conv(x, k, 3); });
        const double tp = time_best_of(20, [&] { kernels::depthwise_conv(y, x, k, 3); });
        row("depthwise_conv k=7", ts, tp);
    }
    {
        auto a = randn(rng, {256, 256});
        auto b = randn(rng, {256, 256});
        Tensor<float> y({256, 256});
        const double ts = time_best_of(20, [&] { (void)ref::matmul(a, b); });
        const double tp = time_best_of(20, [&] { kernels::matmul(y, a, b); });
        row("matmul 256x256", ts, tp);
    }
    {
        const int d = 128, s = 512, h = 16;
        auto x = randn(rng, {d, s});
        auto delta = randn(rng, {d, s});
        for (int64_t i = 0; i < delta.size(); ++i) delta[i] = 0.01f + std::abs(delta[i]) * 0.1f;
        auto b = randn(rng, {h, s});
        auto c = randn(rng, {h, s});
        auto a = randn(rng, {d, h});
        for (int64_t i = 0; i < a.size(); ++i) a[i] = -0.05f - std::abs(a[i]);
        Tensor<float> y({d, s});
        Tensor<float> hs({s, d, h});
        Tensor<float> disc({s, d, 2 * h});
        const double ts = time_best_of(10, [&] { (void)ref::selective_scan(x, delta, b, c, a); });
        const double tp =
            time_best_of(10, [&] { kernels::selective_scan(y, hs, disc, x, delta, b, c, a); });
        row("selective_scan 128x512x16", ts, tp);
    }
    {
        model::ModelConfig cfg;
        cfg.stage_channels = {16, 32, 64, 128};
        auto m = model::Model<float>::build(cfg, 7);
        auto w = randn(rng, {6, 200});
        const double tf = time_best_of(5, [&] { (void)m.predict(w); });
        Graph<float> g;
        auto out = m.forward(g, w);
        auto l = model::loss(g, out, {0.5f, -0.25f});
        const double tb = time_best_of(5, [&] { g.backward(l); });
        std::printf("%-28s %10.3f ms forward %10.3f ms backward\n",
                    "model [16,32,64,128]", tf * 1e3, tb * 1e3);
    }
    return 0;
}
