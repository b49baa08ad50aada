#pragma once

#include <string>

#include "mambaio/graph.hpp"

namespace mambaio::mpc {

// Multi-path convolution block: three parallel depthwise convolutions with
// kernel sizes 1/3/7, channel concatenation, an SE gate over the 3C
// concatenated channels, and a pointwise fusion back down to C.

inline constexpr int kKernelSizes[3] = {1, 3, 7};

template <typename T>
void init_block(ParamStore<T>& ps, const std::string& prefix, int channels, int se_ratio,
                Rng& rng) {
    const int c3 = 3 * channels;
    if (c3 % se_ratio != 0)
        throw ConfigError("mpc: se_ratio must divide 3*channels");
    const int squeeze = c3 / se_ratio;

    // near-identity depthwise start: centered spike plus small noise
    for (int k : kKernelSizes) {
        Tensor<T> w({channels, k});
        for (int c = 0; c < channels; ++c)
            for (int m = 0; m < k; ++m) {
                T v = static_cast<T>(rng.uniform(-0.05, 0.05));
                if (m == (k - 1) / 2) v += T(1);
                w.at(c, m) = v;
            }
        ps.create(prefix + ".dw" + std::to_string(k) + ".weight", std::move(w));
    }

    auto dense = [&](const std::string& name, int out, int in) {
        Tensor<T> w({out, in});
        const double bound = std::sqrt(1.0 / in);
        for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
        ps.create(name + ".weight", std::move(w));
        Tensor<T> b({out});
        for (int64_t i = 0; i < b.size(); ++i) b[i] = static_cast<T>(rng.uniform(-bound, bound));
        ps.create(name + ".bias", std::move(b));
    };
    dense(prefix + ".se.squeeze", squeeze, c3);
    dense(prefix + ".se.excite", c3, squeeze);
    dense(prefix + ".fuse", channels, c3);
}

// strict_len enforces the standalone precondition L >= 7. Interior model
// stages may be shorter than the widest kernel; zero padding keeps the
// convolution well-defined there, so the model builder passes false.
template <typename T>
typename Graph<T>::NodeId forward(Graph<T>& g, const ParamStore<T>& ps, const std::string& prefix,
                                  typename Graph<T>::NodeId x_high, bool strict_len = true) {
    const auto& xv = g.value(x_high);
    if (xv.rank() != 2) throw ShapeError("mpc: expected C x L input");
    if (strict_len && xv.dim(1) < 7)
        throw ContractError("mpc: window too short, L must be >= 7");

    std::vector<typename Graph<T>::NodeId> paths;
    for (int k : kKernelSizes) {
        auto w = g.param(ps, prefix + ".dw" + std::to_string(k) + ".weight");
        paths.push_back(g.depthwise_conv1d(x_high, w, 1, PaddingMode::zero));
    }
    auto concat = g.concat_channels(paths);

    // SE: gate = sigmoid(excite(silu(squeeze(mean_t(concat)))))
    auto pooled = g.global_avg_pool_time(concat);
    auto squeezed = g.silu(g.linear(pooled, g.param(ps, prefix + ".se.squeeze.weight"),
                                    g.param(ps, prefix + ".se.squeeze.bias")));
    auto gate = g.sigmoid(g.linear(squeezed, g.param(ps, prefix + ".se.excite.weight"),
                                   g.param(ps, prefix + ".se.excite.bias")));
    auto gated = g.scale_channels(concat, gate);

    return g.linear(gated, g.param(ps, prefix + ".fuse.weight"),
                    g.param(ps, prefix + ".fuse.bias"));
}

}  // namespace mambaio::mpc
