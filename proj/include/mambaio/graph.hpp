#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mambaio/errors.hpp"
#include "mambaio/kernels.hpp"
#include "mambaio/pyramid.hpp"
#include "mambaio/tensor.hpp"

namespace mambaio {

template <typename T>
struct Parameter {
    Tensor<T> value;
    Tensor<T> grad;
};

// Named parameter set. std::map keeps iteration lexicographic, which fixes
// the order of every merge and update.
template <typename T>
class ParamStore {
public:
    Parameter<T>& create(const std::string& name, Tensor<T> value) {
        if (params_.count(name)) throw ContractError("param store: duplicate name " + name);
        auto& p = params_[name];
        p.grad = Tensor<T>(value.shape());
        p.value = std::move(value);
        return p;
    }

    Parameter<T>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("param store: unknown name " + name);
        return it->second;
    }

    const Parameter<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("param store: unknown name " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad() {
        for (auto& [name, p] : params_) p.grad.fill(T(0));
    }

    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& [name, p] : params_) n += p.value.size();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    size_t count() const { return params_.size(); }

private:
    std::map<std::string, Parameter<T>> params_;
};

enum class PaddingMode { zero, replicate };

inline PaddingMode padding_mode_from(const std::string& s) {
    if (s == "zero") return PaddingMode::zero;
    if (s == "replicate") return PaddingMode::replicate;
    throw ConfigError("unknown padding mode: " + s);
}

// One reverse-mode computation record. Nodes are appended in evaluation
// order; backward walks them in reverse. A record is confined to a single
// thread; independent records may run concurrently against the same
// (read-only) parameter values.
template <typename T>
class Graph {
public:
    using NodeId = int;

    NodeId input(Tensor<T> v) { return add_leaf(std::move(v), ""); }

    NodeId param(const ParamStore<T>& store, const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return it->second;
        NodeId id = add_leaf(store.at(name).value, name);
        bound_[name] = id;
        return id;
    }

    const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

    // Gradient buffers are allocated on first touch, so forward-only graphs
    // never pay for them.
    Tensor<T>& grad(NodeId id) {
        auto& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
        return n.grad;
    }

    T scalar(NodeId id) const {
        const auto& v = value(id);
        if (v.size() != 1) throw ContractError("scalar: node is not a scalar");
        return v[0];
    }

    void check_finite(NodeId id, const std::string& where) const {
        if (!value(id).all_finite()) throw NumericError("non-finite activation in " + where);
    }

    // ---- elementwise ----

    NodeId add(NodeId a, NodeId b) {
        require_same(a, b, "add");
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = value(a)[i] + value(b)[i];
        return add_node(std::move(out), [a, b](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            auto& gb = g.grad(b);
            for (int64_t i = 0; i < gs.size(); ++i) {
                ga[i] += gs[i];
                gb[i] += gs[i];
            }
        });
    }

    NodeId sub(NodeId a, NodeId b) {
        require_same(a, b, "sub");
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = value(a)[i] - value(b)[i];
        return add_node(std::move(out), [a, b](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            auto& gb = g.grad(b);
            for (int64_t i = 0; i < gs.size(); ++i) {
                ga[i] += gs[i];
                gb[i] -= gs[i];
            }
        });
    }

    NodeId mul(NodeId a, NodeId b) {
        require_same(a, b, "mul");
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = value(a)[i] * value(b)[i];
        return add_node(std::move(out), [a, b](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            auto& gb = g.grad(b);
            const auto& va = g.value(a);
            const auto& vb = g.value(b);
            for (int64_t i = 0; i < gs.size(); ++i) {
                ga[i] += gs[i] * vb[i];
                gb[i] += gs[i] * va[i];
            }
        });
    }

    NodeId neg(NodeId a) { return scale(a, T(-1)); }

    NodeId scale(NodeId a, T c) {
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = c * value(a)[i];
        return add_node(std::move(out), [a, c](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            for (int64_t i = 0; i < gs.size(); ++i) ga[i] += c * gs[i];
        });
    }

    NodeId exp(NodeId a) {
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(value(a)[i]);
        return add_node(std::move(out), [a](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            const auto& vs = g.value(self);
            for (int64_t i = 0; i < gs.size(); ++i) ga[i] += gs[i] * vs[i];
        });
    }

    NodeId sigmoid(NodeId a) {
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = sigmoid_val(value(a)[i]);
        return add_node(std::move(out), [a](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            const auto& vs = g.value(self);
            for (int64_t i = 0; i < gs.size(); ++i) {
                const T s = vs[i];
                ga[i] += gs[i] * s * (T(1) - s);
            }
        });
    }

    NodeId silu(NodeId a) {
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = value(a)[i] * sigmoid_val(value(a)[i]);
        return add_node(std::move(out), [a](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            const auto& va = g.value(a);
            for (int64_t i = 0; i < gs.size(); ++i) {
                const T x = va[i];
                const T s = sigmoid_val(x);
                ga[i] += gs[i] * s * (T(1) + x * (T(1) - s));
            }
        });
    }

    NodeId softplus(NodeId a) {
        Tensor<T> out(value(a).shape());
        for (int64_t i = 0; i < out.size(); ++i) out[i] = softplus_val(value(a)[i]);
        return add_node(std::move(out), [a](Graph& g, NodeId self) {
            auto& gs = g.grad(self);
            auto& ga = g.grad(a);
            const auto& va = g.value(a);
            for (int64_t i = 0; i < gs.size(); ++i) ga[i] += gs[i] * sigmoid_val(va[i]);
        });
    }

    // ---- shape ----

    NodeId concat_channels(const std::vector<NodeId>& xs) {
        if (xs.empty()) throw ContractError("concat_channels: no inputs");
        const int len = value(xs[0]).dim(1);
        int rows = 0;
        for (NodeId x : xs) {
            if (value(x).rank() != 2 || value(x).dim(1) != len)
                throw ShapeError("concat_channels: mismatched shapes");
            rows += value(x).dim(0);
        }
        Tensor<T> out({rows, len});
        int r = 0;
        for (NodeId x : xs) {
            const auto& v = value(x);
            for (int i = 0; i < v.dim(0); ++i)
                for (int j = 0; j < len; ++j) out.at(r + i, j) = v.at(i, j);
            r += v.dim(0);
        }
        auto parts = xs;
        return add_node(std::move(out), [parts, len](Graph& g, NodeId self) {
            int r0 = 0;
            for (NodeId x : parts) {
                const int rows_x = g.value(x).dim(0);
                for (int i = 0; i < rows_x; ++i)
                    for (int j = 0; j < len; ++j)
                        g.grad(x).at(i, j) += g.grad(self).at(r0 + i, j);
                r0 += rows_x;
            }
        });
    }

    NodeId slice_rows(NodeId x, int r0, int r1) {
        const auto& v = value(x);
        if (r0 < 0 || r1 > v.dim(0) || r0 >= r1) throw ShapeError("slice_rows: bad range");
        const int len = v.dim(1);
        Tensor<T> out({r1 - r0, len});
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < len; ++j) out.at(i - r0, j) = v.at(i, j);
        return add_node(std::move(out), [x, r0, r1, len](Graph& g, NodeId self) {
            for (int i = r0; i < r1; ++i)
                for (int j = 0; j < len; ++j) g.grad(x).at(i, j) += g.grad(self).at(i - r0, j);
        });
    }

    NodeId transpose(NodeId x) {
        const auto& v = value(x);
        Tensor<T> out({v.dim(1), v.dim(0)});
        for (int i = 0; i < v.dim(0); ++i)
            for (int j = 0; j < v.dim(1); ++j) out.at(j, i) = v.at(i, j);
        return add_node(std::move(out), [x](Graph& g, NodeId self) {
            const auto& gs = g.grad(self);
            for (int i = 0; i < gs.dim(0); ++i)
                for (int j = 0; j < gs.dim(1); ++j) g.grad(x).at(j, i) += gs.at(i, j);
        });
    }

    // ---- dense / convolutional ----

    // Channel-mixing map. x may be a vector (Cin) or a map (Cin x L); W is
    // Cout x Cin, b optional.
    NodeId linear(NodeId x, NodeId w, NodeId b = -1) {
        if (value(x).rank() == 1) {
            // vector path: y[o] = b[o] + sum_i W[o,i] x[i]
            const auto& xv = value(x);
            const auto& wv = value(w);
            if (wv.dim(1) != xv.dim(0)) throw ShapeError("linear: W columns != x size");
            Tensor<T> out({wv.dim(0)});
            for (int o = 0; o < wv.dim(0); ++o) {
                T acc = b >= 0 ? value(b)[o] : T(0);
                for (int i = 0; i < wv.dim(1); ++i) acc += wv.at(o, i) * xv[i];
                out[o] = acc;
            }
            return add_node(std::move(out), [x, w, b](Graph& g, NodeId self) {
                const auto& wv = g.value(w);
                for (int o = 0; o < wv.dim(0); ++o) {
                    const T gv = g.grad(self)[o];
                    for (int i = 0; i < wv.dim(1); ++i) {
                        g.grad(x)[i] += wv.at(o, i) * gv;
                        g.grad(w).at(o, i) += g.value(x)[i] * gv;
                    }
                    if (b >= 0) g.grad(b)[o] += gv;
                }
            });
        }
        return pointwise_conv1d(x, w, b, 1);
    }

    // 1-tap convolution over time with stride; the inter-stage downsampler.
    NodeId pointwise_conv1d(NodeId x, NodeId w, NodeId b, int stride) {
        if (stride < 1) throw ConfigError("pointwise_conv1d: stride must be >= 1");
        const auto& xv = value(x);
        if (xv.rank() != 2 || value(w).dim(1) != xv.dim(0))
            throw ShapeError("pointwise_conv1d: shape mismatch");
        const int lout = (xv.dim(1) + stride - 1) / stride;
        Tensor<T> out({value(w).dim(0), lout});
        kernels::pointwise_conv(out, xv, value(w), b >= 0 ? value(b).data() : nullptr, stride);
        return add_node(std::move(out), [x, w, b, stride](Graph& g, NodeId self) {
            kernels::pointwise_conv_grad_x(g.grad(x), g.grad(self), g.value(w), stride);
            kernels::pointwise_conv_grad_w(g.grad(w), g.grad(self), g.value(x), stride);
            if (b >= 0) {
                const auto& gy = g.grad(self);
                for (int o = 0; o < gy.dim(0); ++o) {
                    T acc = T(0);
                    for (int j = 0; j < gy.dim(1); ++j) acc += gy.at(o, j);
                    g.grad(b)[o] += acc;
                }
            }
        });
    }

    // Per-channel convolution, same output length (stride 1) or strided.
    NodeId depthwise_conv1d(NodeId x, NodeId k, int stride = 1,
                            PaddingMode mode = PaddingMode::zero) {
        const auto& xv = value(x);
        const auto& kv = value(k);
        if (xv.rank() != 2 || kv.rank() != 2 || kv.dim(0) != xv.dim(0))
            throw ShapeError("depthwise_conv1d: shape mismatch");
        if (stride < 1) throw ConfigError("depthwise_conv1d: stride must be >= 1");
        const int pad = (kv.dim(1) - 1) / 2;
        Tensor<T> out = dw_forward(xv, kv, pad, stride, mode);
        return add_node(std::move(out), [x, k, stride, mode, pad](Graph& g, NodeId self) {
            dw_backward(g.grad(x), g.grad(k), g.grad(self), g.value(x), g.value(k), pad, stride,
                        mode);
        });
    }

    NodeId matmul(NodeId a, NodeId b) {
        const auto& av = value(a);
        const auto& bv = value(b);
        if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
            throw ShapeError("matmul: inner dimensions differ");
        Tensor<T> out({av.dim(0), bv.dim(1)});
        kernels::matmul(out, av, bv);
        return add_node(std::move(out), [a, b](Graph& g, NodeId self) {
            kernels::matmul_a_bt_acc(g.grad(a), g.grad(self), g.value(b));  // gA += gY B^T
            kernels::matmul_at_b_acc(g.grad(b), g.value(a), g.grad(self));  // gB += A^T gY
        });
    }

    // ---- normalization / reductions ----

    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, T eps = T(1e-5)) {
        const auto& xv = value(x);
        if (xv.rank() != 2) throw ShapeError("layer_norm: expected C x L");
        const int ch = xv.dim(0), len = xv.dim(1);
        auto stats = std::make_shared<Tensor<T>>(Tensor<T>({2, len}));  // mu, inv_std per column
        Tensor<T> out({ch, len});
        for (int t = 0; t < len; ++t) {
            T mu = T(0);
            for (int c = 0; c < ch; ++c) mu += xv.at(c, t);
            mu /= T(ch);
            T var = T(0);
            for (int c = 0; c < ch; ++c) {
                const T d = xv.at(c, t) - mu;
                var += d * d;
            }
            var /= T(ch);
            const T istd = T(1) / std::sqrt(var + eps);
            stats->at(0, t) = mu;
            stats->at(1, t) = istd;
            for (int c = 0; c < ch; ++c)
                out.at(c, t) = value(gamma)[c] * (xv.at(c, t) - mu) * istd + value(beta)[c];
        }
        return add_node(std::move(out), [x, gamma, beta, stats](Graph& g, NodeId self) {
            const auto& xv = g.value(x);
            const int ch = xv.dim(0), len = xv.dim(1);
            for (int t = 0; t < len; ++t) {
                const T mu = stats->at(0, t), istd = stats->at(1, t);
                T mean_gh = T(0), mean_ghx = T(0);
                for (int c = 0; c < ch; ++c) {
                    const T xhat = (xv.at(c, t) - mu) * istd;
                    const T gh = g.grad(self).at(c, t) * g.value(gamma)[c];
                    mean_gh += gh;
                    mean_ghx += gh * xhat;
                    g.grad(gamma)[c] += g.grad(self).at(c, t) * xhat;
                    g.grad(beta)[c] += g.grad(self).at(c, t);
                }
                mean_gh /= T(ch);
                mean_ghx /= T(ch);
                for (int c = 0; c < ch; ++c) {
                    const T xhat = (xv.at(c, t) - mu) * istd;
                    const T gh = g.grad(self).at(c, t) * g.value(gamma)[c];
                    g.grad(x).at(c, t) += istd * (gh - mean_gh - xhat * mean_ghx);
                }
            }
        });
    }

    // axis 0: down the rows of each column; axis 1: along each row.
    NodeId softmax(NodeId x, int axis) {
        const auto& xv = value(x);
        if (xv.rank() != 2 || (axis != 0 && axis != 1)) throw ShapeError("softmax: bad input");
        Tensor<T> out(xv.shape());
        const int n_lines = (axis == 1) ? xv.dim(0) : xv.dim(1);
        const int line_len = (axis == 1) ? xv.dim(1) : xv.dim(0);
        auto get = [&](const Tensor<T>& m, int line, int k) -> const T& {
            return axis == 1 ? m.at(line, k) : m.at(k, line);
        };
        for (int l = 0; l < n_lines; ++l) {
            T mx = get(xv, l, 0);
            for (int k = 1; k < line_len; ++k) mx = std::max(mx, get(xv, l, k));
            T z = T(0);
            for (int k = 0; k < line_len; ++k) {
                const T e = std::exp(get(xv, l, k) - mx);
                (axis == 1 ? out.at(l, k) : out.at(k, l)) = e;
                z += e;
            }
            for (int k = 0; k < line_len; ++k) (axis == 1 ? out.at(l, k) : out.at(k, l)) /= z;
        }
        return add_node(std::move(out), [x, axis](Graph& g, NodeId self) {
            const auto& y = g.value(self);
            const auto& gy = g.grad(self);
            const int n_lines = (axis == 1) ? y.dim(0) : y.dim(1);
            const int line_len = (axis == 1) ? y.dim(1) : y.dim(0);
            for (int l = 0; l < n_lines; ++l) {
                T dot = T(0);
                for (int k = 0; k < line_len; ++k)
                    dot += (axis == 1 ? gy.at(l, k) : gy.at(k, l)) *
                           (axis == 1 ? y.at(l, k) : y.at(k, l));
                for (int k = 0; k < line_len; ++k) {
                    const T yy = axis == 1 ? y.at(l, k) : y.at(k, l);
                    const T gg = axis == 1 ? gy.at(l, k) : gy.at(k, l);
                    (axis == 1 ? g.grad(x).at(l, k) : g.grad(x).at(k, l)) += yy * (gg - dot);
                }
            }
        });
    }

    NodeId global_avg_pool_time(NodeId x) {
        const auto& xv = value(x);
        if (xv.rank() != 2) throw ShapeError("global_avg_pool_time: expected C x L");
        const int ch = xv.dim(0), len = xv.dim(1);
        Tensor<T> out({ch});
        for (int c = 0; c < ch; ++c) {
            T acc = T(0);
            for (int t = 0; t < len; ++t) acc += xv.at(c, t);
            out[c] = acc / T(len);
        }
        return add_node(std::move(out), [x, ch, len](Graph& g, NodeId self) {
            for (int c = 0; c < ch; ++c) {
                const T gv = g.grad(self)[c] / T(len);
                for (int t = 0; t < len; ++t) g.grad(x).at(c, t) += gv;
            }
        });
    }

    // y[c,t] = x[c,t] * gate[c]
    NodeId scale_channels(NodeId x, NodeId gate) {
        const auto& xv = value(x);
        if (xv.rank() != 2 || value(gate).rank() != 1 || value(gate).dim(0) != xv.dim(0))
            throw ShapeError("scale_channels: shape mismatch");
        Tensor<T> out(xv.shape());
        for (int c = 0; c < xv.dim(0); ++c)
            for (int t = 0; t < xv.dim(1); ++t) out.at(c, t) = xv.at(c, t) * value(gate)[c];
        return add_node(std::move(out), [x, gate](Graph& g, NodeId self) {
            const auto& xv = g.value(x);
            for (int c = 0; c < xv.dim(0); ++c) {
                T acc = T(0);
                for (int t = 0; t < xv.dim(1); ++t) {
                    g.grad(x).at(c, t) += g.grad(self).at(c, t) * g.value(gate)[c];
                    acc += g.grad(self).at(c, t) * xv.at(c, t);
                }
                g.grad(gate)[c] += acc;
            }
        });
    }

    NodeId sum_all(NodeId x) {
        T acc = T(0);
        for (int64_t i = 0; i < value(x).size(); ++i) acc += value(x)[i];
        return add_node(Tensor<T>::scalar(acc), [x](Graph& g, NodeId self) {
            const T gv = g.grad(self)[0];
            for (int64_t i = 0; i < g.grad(x).size(); ++i) g.grad(x)[i] += gv;
        });
    }

    // Mean of componentwise squared error against a fixed target.
    NodeId mse(NodeId pred, Tensor<T> target) {
        if (!value(pred).same_shape(target)) throw ShapeError("mse: shape mismatch");
        const int64_t n = target.size();
        T acc = T(0);
        for (int64_t i = 0; i < n; ++i) {
            const T d = value(pred)[i] - target[i];
            acc += d * d;
        }
        auto tgt = std::make_shared<Tensor<T>>(std::move(target));
        return add_node(Tensor<T>::scalar(acc / T(n)), [pred, tgt, n](Graph& g, NodeId self) {
            const T gv = g.grad(self)[0] * T(2) / T(n);
            for (int64_t i = 0; i < n; ++i)
                g.grad(pred)[i] += gv * (g.value(pred)[i] - (*tgt)[i]);
        });
    }

    // ---- task-specific fused nodes ----

    // Fixed-kernel low-band extraction: upsample(avg_downsample(x)).
    NodeId decompose_low(NodeId x, int kernel, int stride) {
        const auto& xv = value(x);
        Tensor<T> ld = pyramid::lowpass_downsample(xv, kernel, stride);
        Tensor<T> low = pyramid::upsample_nearest(ld, stride, xv.dim(1));
        return add_node(std::move(low), [x, kernel, stride](Graph& g, NodeId self) {
            Tensor<T> zero(g.grad(self).shape());
            Tensor<T> gx = pyramid::decompose_backward(g.grad(self), zero, kernel, stride);
            for (int64_t i = 0; i < gx.size(); ++i) g.grad(x)[i] += gx[i];
        });
    }

    // x: D x S, delta: D x S (positive), b/c: H x S, a: D x H (negative).
    NodeId selective_scan(NodeId x, NodeId delta, NodeId b, NodeId c, NodeId a) {
        const auto& xv = value(x);
        const int d_ch = xv.dim(0), steps = xv.dim(1), h_sz = value(a).dim(1);
        if (value(delta).dim(0) != d_ch || value(delta).dim(1) != steps ||
            value(b).dim(1) != steps || value(c).dim(1) != steps ||
            value(b).dim(0) != h_sz || value(c).dim(0) != h_sz || value(a).dim(0) != d_ch)
            throw ShapeError("selective_scan: shape mismatch");
        auto hs = std::make_shared<Tensor<T>>(Tensor<T>({steps, d_ch, h_sz}));
        auto disc = std::make_shared<Tensor<T>>(Tensor<T>({steps, d_ch, 2 * h_sz}));
        Tensor<T> y({d_ch, steps});
        kernels::selective_scan(y, *hs, *disc, xv, value(delta), value(b), value(c), value(a));
        return add_node(std::move(y), [x, delta, b, c, a, hs, disc](Graph& g, NodeId self) {
            kernels::selective_scan_grad(g.grad(x), g.grad(delta), g.grad(b), g.grad(c),
                                         g.grad(a), g.grad(self), *hs, *disc, g.value(x),
                                         g.value(delta), g.value(b), g.value(c), g.value(a));
        });
    }

    // ---- reverse pass ----

    // Propagates d(root)/d(node) into every node. Intermediate gradients are
    // reset per call; leaf gradients (inputs and parameters) accumulate, so a
    // second call without reset doubles them.
    void backward(NodeId root) {
        if (value(root).size() != 1)
            throw ContractError("backward: root must be a scalar");
        for (auto& n : nodes_)
            if (n.back && n.grad.size() == n.value.size()) n.grad.fill(T(0));
        grad(root)[0] += T(1);
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
            auto& n = nodes_[static_cast<size_t>(id)];
            if (n.back) n.back(*this, id);
        }
    }

    // Adds this record's parameter gradients into the store, in
    // lexicographic name order (bound_ is a std::map).
    void accumulate_param_grads(ParamStore<T>& store, T scale = T(1)) const {
        for (const auto& [name, id] : bound_) {
            auto& pg = store.at(name).grad;
            const auto& ng = nodes_[static_cast<size_t>(id)].grad;
            if (ng.size() != pg.size()) continue;  // never touched by backward
            for (int64_t i = 0; i < pg.size(); ++i) pg[i] += scale * ng[i];
        }
    }

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::function<void(Graph&, NodeId)> back;  // empty for leaves
    };

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> bound_;

    NodeId add_leaf(Tensor<T> v, const std::string&) {
        Node n;
        n.value = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId add_node(Tensor<T> v, std::function<void(Graph&, NodeId)> back) {
        Node n;
        n.value = std::move(v);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    void require_same(NodeId a, NodeId b, const char* op) const {
        if (!value(a).same_shape(value(b)))
            throw ShapeError(std::string(op) + ": operand shapes differ");
    }

    static T sigmoid_val(T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
    }

    static T softplus_val(T x) {
        if (x > T(30)) return x;
        if (x < T(-30)) return std::exp(x);
        return std::log1p(std::exp(x));
    }

    static Tensor<T> dw_forward(const Tensor<T>& x, const Tensor<T>& k, int pad, int stride,
                                PaddingMode mode) {
        if (stride == 1 && mode == PaddingMode::zero) {
            Tensor<T> out(x.shape());
            kernels::depthwise_conv(out, x, k, pad);
            return out;
        }
        const int ch = x.dim(0), len = x.dim(1), ks = k.dim(1);
        const int lout = (len + 2 * pad - ks) / stride + 1;
        Tensor<T> out({ch, lout});
        for (int c = 0; c < ch; ++c)
            for (int j = 0; j < lout; ++j) {
                T acc = T(0);
                for (int m = 0; m < ks; ++m) {
                    int u = j * stride - pad + m;
                    if (mode == PaddingMode::replicate) u = u < 0 ? 0 : (u >= len ? len - 1 : u);
                    if (u >= 0 && u < len) acc += k.at(c, m) * x.at(c, u);
                }
                out.at(c, j) = acc;
            }
        return out;
    }

    static void dw_backward(Tensor<T>& gx, Tensor<T>& gk, const Tensor<T>& gy,
                            const Tensor<T>& x, const Tensor<T>& k, int pad, int stride,
                            PaddingMode mode) {
        if (stride == 1 && mode == PaddingMode::zero) {
            kernels::depthwise_conv_grad_x(gx, gy, k, pad);
            kernels::depthwise_conv_grad_k(gk, gy, x, pad);
            return;
        }
        const int ch = x.dim(0), len = x.dim(1), ks = k.dim(1), lout = gy.dim(1);
        for (int c = 0; c < ch; ++c)
            for (int j = 0; j < lout; ++j)
                for (int m = 0; m < ks; ++m) {
                    int u = j * stride - pad + m;
                    if (mode == PaddingMode::replicate) u = u < 0 ? 0 : (u >= len ? len - 1 : u);
                    if (u >= 0 && u < len) {
                        gx.at(c, u) += k.at(c, m) * gy.at(c, j);
                        gk.at(c, m) += x.at(c, u) * gy.at(c, j);
                    }
                }
    }
};

}  // namespace mambaio
