#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mambaio/graph.hpp"

namespace mambaio::ssm {

template <typename T>
struct DiscretizedPair {
    std::vector<T> a_bar;  // exp(delta * a), elementwise over the diagonal
    std::vector<T> b_bar;  // expm1(delta * a) / a * b
};

// Zero-order-hold discretization of a diagonal continuous-time system.
// a holds the diagonal entries; b matches a in length. The a -> 0 removable
// singularity takes the series limit delta * b (expm1 keeps the general
// branch accurate arbitrarily close to it).
template <typename T>
DiscretizedPair<T> zoh_discretize(const std::vector<T>& a, const std::vector<T>& b, T delta) {
    if (delta <= T(0)) throw ContractError("zoh_discretize: invalid step, delta must be > 0");
    if (a.size() != b.size()) throw ShapeError("zoh_discretize: a and b sizes differ");
    DiscretizedPair<T> out;
    out.a_bar.resize(a.size());
    out.b_bar.resize(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const T u = delta * a[i];
        out.a_bar[i] = std::exp(u);
        out.b_bar[i] = (a[i] == T(0))
                           ? delta * b[i]
                           : static_cast<T>(std::expm1(static_cast<double>(u))) / a[i] * b[i];
    }
    return out;
}

// Diagonal recurrence with time-varying parameters, evaluated sequentially:
//   h_t = a_bar_t (*) h_{t-1} + b_bar_t * x_t,   y_t = c_t . h_t
// Shapes: x is S x D; a_bar, b_bar are S x D x H; c is S x H; returns S x D.
template <typename T>
Tensor<T> scan(const Tensor<T>& a_bar, const Tensor<T>& b_bar, const Tensor<T>& c,
               const Tensor<T>& x) {
    const int steps = x.dim(0), d_ch = x.dim(1);
    const int h_sz = a_bar.dim(2);
    if (a_bar.dim(0) != steps || a_bar.dim(1) != d_ch || !b_bar.same_shape(a_bar) ||
        c.dim(0) != steps || c.dim(1) != h_sz)
        throw ShapeError("scan: shape mismatch");
    Tensor<T> y({steps, d_ch});
    Tensor<T> h({d_ch, h_sz});
    for (int t = 0; t < steps; ++t) {
        for (int d = 0; d < d_ch; ++d) {
            T acc = T(0);
            for (int i = 0; i < h_sz; ++i) {
                h.at(d, i) = a_bar.at(t, d, i) * h.at(d, i) + b_bar.at(t, d, i) * x.at(t, d);
                acc += c.at(t, i) * h.at(d, i);
            }
            if (!std::isfinite(static_cast<double>(acc)))
                throw NumericError("scan: non-finite state at step " + std::to_string(t));
            y.at(t, d) = acc;
        }
    }
    return y;
}

// Time-invariant convenience: broadcasts one (a_bar, b_bar, c) over S steps.
template <typename T>
Tensor<T> scan_time_invariant(const std::vector<T>& a_bar, const std::vector<T>& b_bar,
                              const std::vector<T>& c, const Tensor<T>& x) {
    const int steps = x.dim(0), d_ch = x.dim(1);
    const int h_sz = static_cast<int>(a_bar.size());
    Tensor<T> ab({steps, d_ch, h_sz}), bb({steps, d_ch, h_sz}), cc({steps, h_sz});
    for (int t = 0; t < steps; ++t) {
        for (int i = 0; i < h_sz; ++i) cc.at(t, i) = c[static_cast<size_t>(i)];
        for (int d = 0; d < d_ch; ++d)
            for (int i = 0; i < h_sz; ++i) {
                ab.at(t, d, i) = a_bar[static_cast<size_t>(i)];
                bb.at(t, d, i) = b_bar[static_cast<size_t>(i)];
            }
    }
    return scan(ab, bb, cc, x);
}

// Structured kernel of the time-invariant system: K[j] = c . a_bar^j b_bar.
template <typename T>
std::vector<T> ssm_kernel(const std::vector<T>& a_bar, const std::vector<T>& b_bar,
                          const std::vector<T>& c, int steps) {
    if (steps <= 0) throw ContractError("ssm_kernel: S must be positive");
    std::vector<T> k(static_cast<size_t>(steps), T(0));
    std::vector<T> pow_b = b_bar;  // a_bar^j * b_bar
    for (int j = 0; j < steps; ++j) {
        T acc = T(0);
        for (size_t i = 0; i < c.size(); ++i) acc += c[i] * pow_b[i];
        k[static_cast<size_t>(j)] = acc;
        for (size_t i = 0; i < pow_b.size(); ++i) pow_b[i] *= a_bar[i];
    }
    return k;
}

// Causal 1-D convolution y_t = sum_{j<=t} K[j] x_{t-j}, per channel.
template <typename T>
Tensor<T> causal_conv(const std::vector<T>& k, const Tensor<T>& x) {
    const int steps = x.dim(0), d_ch = x.dim(1);
    Tensor<T> y({steps, d_ch});
    for (int t = 0; t < steps; ++t)
        for (int d = 0; d < d_ch; ++d) {
            T acc = T(0);
            for (int j = 0; j <= t && j < static_cast<int>(k.size()); ++j)
                acc += k[static_cast<size_t>(j)] * x.at(t - j, d);
            y.at(t, d) = acc;
        }
    return y;
}

// ---- differentiable blocks ----

// Input-dependent scan parameters around the fused graph node:
//   delta = softplus(Wd x + bd), B = Wb x, C = Wc x, A = -exp(A_log)
template <typename T>
void init_ssm_core(ParamStore<T>& ps, const std::string& prefix, int channels, int state_size,
                   Rng& rng) {
    Tensor<T> a_log({channels, state_size});
    for (int d = 0; d < channels; ++d)
        for (int i = 0; i < state_size; ++i) a_log.at(d, i) = static_cast<T>(std::log(1.0 + i));
    ps.create(prefix + ".a_log", std::move(a_log));

    auto proj = [&](const std::string& name, int out, int in, bool bias) {
        Tensor<T> w({out, in});
        const double bound = std::sqrt(1.0 / in);
        for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
        ps.create(name + ".weight", std::move(w));
        if (bias) ps.create(name + ".bias", Tensor<T>({out}));
    };
    proj(prefix + ".delta", channels, channels, true);
    proj(prefix + ".b", state_size, channels, true);
    proj(prefix + ".c", state_size, channels, true);

    // softplus(bias) log-uniform in [1e-3, 1e-1]
    auto& db = ps.at(prefix + ".delta.bias");
    for (int64_t i = 0; i < db.value.size(); ++i) {
        const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        db.value[i] = static_cast<T>(std::log(std::exp(dt) - 1.0));  // softplus inverse
    }
}

template <typename T>
typename Graph<T>::NodeId selective_scan_forward(Graph<T>& g, const ParamStore<T>& ps,
                                                 const std::string& prefix,
                                                 typename Graph<T>::NodeId x) {
    auto delta = g.softplus(g.linear(x, g.param(ps, prefix + ".delta.weight"),
                                     g.param(ps, prefix + ".delta.bias")));
    auto b = g.linear(x, g.param(ps, prefix + ".b.weight"), g.param(ps, prefix + ".b.bias"));
    auto c = g.linear(x, g.param(ps, prefix + ".c.weight"), g.param(ps, prefix + ".c.bias"));
    auto a = g.neg(g.exp(g.param(ps, prefix + ".a_log")));
    return g.selective_scan(x, delta, b, c, a);
}

// MambaVision-style block:
//   X1 = scan(silu(conv(linear(x)))), X2 = silu(conv(linear(x)))
//   out = linear(concat(X1, X2)) + x
template <typename T>
void init_mamba_block(ParamStore<T>& ps, const std::string& prefix, int channels, int state_size,
                      int conv_kernel, Rng& rng) {
    auto dense = [&](const std::string& name, int out, int in) {
        Tensor<T> w({out, in});
        const double bound = std::sqrt(1.0 / in);
        for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
        ps.create(name + ".weight", std::move(w));
        Tensor<T> b({out});
        for (int64_t i = 0; i < b.size(); ++i) b[i] = static_cast<T>(rng.uniform(-bound, bound));
        ps.create(name + ".bias", std::move(b));
    };
    auto dwconv = [&](const std::string& name) {
        Tensor<T> w({channels, conv_kernel});
        for (int c = 0; c < channels; ++c)
            for (int m = 0; m < conv_kernel; ++m) {
                T v = static_cast<T>(rng.uniform(-0.05, 0.05));
                if (m == (conv_kernel - 1) / 2) v += T(1);
                w.at(c, m) = v;
            }
        ps.create(name + ".weight", std::move(w));
    };
    dense(prefix + ".in1", channels, channels);
    dense(prefix + ".in2", channels, channels);
    dwconv(prefix + ".conv1");
    dwconv(prefix + ".conv2");
    init_ssm_core(ps, prefix + ".ssm", channels, state_size, rng);
    dense(prefix + ".out", channels, 2 * channels);
}

template <typename T>
typename Graph<T>::NodeId mamba_forward(Graph<T>& g, const ParamStore<T>& ps,
                                        const std::string& prefix,
                                        typename Graph<T>::NodeId x_low) {
    auto branch = [&](const char* lin, const char* conv) {
        auto h = g.linear(x_low, g.param(ps, prefix + lin + std::string(".weight")),
                          g.param(ps, prefix + lin + std::string(".bias")));
        h = g.depthwise_conv1d(h, g.param(ps, prefix + conv + std::string(".weight")), 1,
                               PaddingMode::zero);
        return g.silu(h);
    };
    auto x1 = selective_scan_forward(g, ps, prefix + ".ssm", branch(".in1", ".conv1"));
    auto x2 = branch(".in2", ".conv2");
    auto fused = g.linear(g.concat_channels({x1, x2}), g.param(ps, prefix + ".out.weight"),
                          g.param(ps, prefix + ".out.bias"));
    return g.add(fused, x_low);
}

// Multi-head self-attention with pre-layer-norm and residual; no positional
// encoding (the scan upstream already carries order).
template <typename T>
void init_attention(ParamStore<T>& ps, const std::string& prefix, int channels, Rng& rng) {
    ps.create(prefix + ".norm.gamma", Tensor<T>::full({channels}, T(1)));
    ps.create(prefix + ".norm.beta", Tensor<T>({channels}));
    auto dense = [&](const std::string& name, bool bias) {
        Tensor<T> w({channels, channels});
        const double bound = std::sqrt(1.0 / channels);
        for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
        ps.create(name + ".weight", std::move(w));
        if (bias) ps.create(name + ".bias", Tensor<T>({channels}));
    };
    dense(prefix + ".q", true);
    // a key bias shifts every score in a row equally; softmax cancels it
    dense(prefix + ".k", false);
    dense(prefix + ".v", true);
    dense(prefix + ".out", true);
}

template <typename T>
typename Graph<T>::NodeId attention_forward(Graph<T>& g, const ParamStore<T>& ps,
                                            const std::string& prefix,
                                            typename Graph<T>::NodeId x, int heads) {
    const int channels = g.value(x).dim(0);
    if (channels % heads != 0)
        throw ConfigError("attention: channels not divisible by head count");
    const int dh = channels / heads;

    auto xn = g.layer_norm(x, g.param(ps, prefix + ".norm.gamma"),
                           g.param(ps, prefix + ".norm.beta"));
    auto proj = [&](const char* name, bool bias) {
        return g.linear(xn, g.param(ps, prefix + name + std::string(".weight")),
                        bias ? g.param(ps, prefix + name + std::string(".bias")) : -1);
    };
    auto q = proj(".q", true), k = proj(".k", false), v = proj(".v", true);

    std::vector<typename Graph<T>::NodeId> head_outs;
    const T inv_sqrt = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
    for (int h = 0; h < heads; ++h) {
        auto qh = g.slice_rows(q, h * dh, (h + 1) * dh);
        auto kh = g.slice_rows(k, h * dh, (h + 1) * dh);
        auto vh = g.slice_rows(v, h * dh, (h + 1) * dh);
        auto scores = g.scale(g.matmul(g.transpose(qh), kh), inv_sqrt);  // L x L, rows = queries
        auto attn = g.softmax(scores, 1);
        head_outs.push_back(g.matmul(vh, g.transpose(attn)));
    }
    auto merged = g.concat_channels(head_outs);
    auto out = g.linear(merged, g.param(ps, prefix + ".out.weight"),
                        g.param(ps, prefix + ".out.bias"));
    return g.add(out, x);
}

}  // namespace mambaio::ssm
