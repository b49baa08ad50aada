#pragma once

#include <cmath>

#include "mambaio/tensor.hpp"

// Serial reference implementations. Deliberately the dumbest possible
// loops, written independently of kernels.hpp: the unit tests compare the
// production kernels against these, and the benchmark times both. Not used
// anywhere on the production path.
namespace mambaio::ref {

template <typename T>
Tensor<T> pointwise_conv(const Tensor<T>& x, const Tensor<T>& w, const T* bias, int stride) {
    const int cin = x.dim(0), len = x.dim(1), cout = w.dim(0);
    const int lout = (len + stride - 1) / stride;
    Tensor<T> y({cout, lout});
    for (int o = 0; o < cout; ++o)
        for (int j = 0; j < lout; ++j) {
            T acc = bias ? bias[o] : T(0);
            for (int i = 0; i < cin; ++i) acc += w.at(o, i) * x.at(i, j * stride);
            y.at(o, j) = acc;
        }
    return y;
}

template <typename T>
Tensor<T> depthwise_conv(const Tensor<T>& x, const Tensor<T>& k, int pad) {
    const int ch = x.dim(0), len = x.dim(1), ks = k.dim(1);
    Tensor<T> y({ch, len});
    for (int c = 0; c < ch; ++c)
        for (int t = 0; t < len; ++t) {
            T acc = T(0);
            for (int m = 0; m < ks; ++m) {
                int u = t + m - pad;
                if (u >= 0 && u < len) acc += k.at(c, m) * x.at(c, u);
            }
            y.at(c, t) = acc;
        }
    return y;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const int m = a.dim(0), kk = a.dim(1), n = b.dim(1);
    Tensor<T> y({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            T acc = T(0);
            for (int p = 0; p < kk; ++p) acc += a.at(i, p) * b.at(p, j);
            y.at(i, j) = acc;
        }
    return y;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const Tensor<T>& delta, const Tensor<T>& b,
                         const Tensor<T>& c, const Tensor<T>& a) {
    const int d_ch = x.dim(0), steps = x.dim(1), h_sz = a.dim(1);
    Tensor<T> y({d_ch, steps});
    Tensor<T> h({d_ch, h_sz});
    for (int t = 0; t < steps; ++t)
        for (int d = 0; d < d_ch; ++d) {
            T acc = T(0);
            for (int i = 0; i < h_sz; ++i) {
                T u = delta.at(d, t) * a.at(d, i);
                T abar = std::exp(u);
                T bbar = static_cast<T>(std::expm1(static_cast<double>(u))) / a.at(d, i) *
                         b.at(i, t);
                h.at(d, i) = abar * h.at(d, i) + bbar * x.at(d, t);
                acc += c.at(i, t) * h.at(d, i);
            }
            y.at(d, t) = acc;
        }
    return y;
}

}  // namespace mambaio::ref
