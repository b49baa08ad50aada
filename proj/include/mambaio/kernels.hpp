#pragma once

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mambaio/errors.hpp"
#include "mambaio/tensor.hpp"

// Production kernels. Every parallel loop runs over independent output
// elements and each element is reduced serially in a fixed order, so
// results are bit-identical for any thread count. Cross-element
// reductions (losses, norms) stay serial at the call sites.
namespace mambaio::kernels {

inline constexpr int64_t kParallelCutoff = 4096;

// Large enough and not already inside an outer parallel region (the
// trainer parallelizes across windows; nested teams only add overhead).
inline bool parallelize(int64_t work) {
#ifdef _OPENMP
    return work > kParallelCutoff && !omp_in_parallel();
#else
    (void)work;
    return false;
#endif
}

// y[o,j] = b[o] + sum_i W[o,i] * x[i, j*stride]
template <typename T>
void pointwise_conv(Tensor<T>& y, const Tensor<T>& x, const Tensor<T>& w, const T* bias,
                    int stride) {
    const int cin = x.dim(0), len = x.dim(1);
    const int cout = w.dim(0);
    const int lout = (len + stride - 1) / stride;
    (void)lout;
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(cout) * len))
    for (int o = 0; o < cout; ++o) {
        T* yo = &y.at(o, 0);
        const int lo = y.dim(1);
        for (int j = 0; j < lo; ++j) yo[j] = bias ? bias[o] : T(0);
        for (int i = 0; i < cin; ++i) {
            const T wv = w.at(o, i);
            const T* xi = &x.at(i, 0);
            for (int j = 0; j < lo; ++j) yo[j] += wv * xi[j * stride];
        }
    }
}

// gx[i,t] = sum_o W[o,i] * gy[o, t/stride]   (t multiple of stride)
template <typename T>
void pointwise_conv_grad_x(Tensor<T>& gx, const Tensor<T>& gy, const Tensor<T>& w, int stride) {
    const int cin = gx.dim(0);
    const int cout = w.dim(0), lo = gy.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(cin) * lo * cout))
    for (int i = 0; i < cin; ++i) {
        T* gi = &gx.at(i, 0);
        for (int o = 0; o < cout; ++o) {
            const T wv = w.at(o, i);
            const T* go = &gy.at(o, 0);
            if (stride == 1) {
                for (int j = 0; j < lo; ++j) gi[j] += wv * go[j];
            } else {
                for (int j = 0; j < lo; ++j) gi[j * stride] += wv * go[j];
            }
        }
    }
}

template <typename T>
void pointwise_conv_grad_w(Tensor<T>& gw, const Tensor<T>& gy, const Tensor<T>& x, int stride) {
    const int cin = x.dim(0);
    const int cout = gy.dim(0), lo = gy.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(cout) * cin))
    for (int o = 0; o < cout; ++o) {
        for (int i = 0; i < cin; ++i) {
            T acc = T(0);
            for (int j = 0; j < lo; ++j) acc += gy.at(o, j) * x.at(i, j * stride);
            gw.at(o, i) += acc;
        }
    }
}

// Depthwise 1-D convolution, zero padding, stride 1, same output length.
// y[c,t] = sum_m K[c,m] * x[c, t+m-pad]
template <typename T>
void depthwise_conv(Tensor<T>& y, const Tensor<T>& x, const Tensor<T>& k, int pad) {
    const int ch = x.dim(0), len = x.dim(1), ks = k.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(ch) * len))
    for (int c = 0; c < ch; ++c) {
        const T* xc = &x.at(c, 0);
        T* yc = &y.at(c, 0);
        for (int t = 0; t < len; ++t) {
            T acc = T(0);
            for (int m = 0; m < ks; ++m) {
                const int u = t + m - pad;
                if (u >= 0 && u < len) acc += k.at(c, m) * xc[u];
            }
            yc[t] = acc;
        }
    }
}

template <typename T>
void depthwise_conv_grad_x(Tensor<T>& gx, const Tensor<T>& gy, const Tensor<T>& k, int pad) {
    const int ch = gx.dim(0), len = gx.dim(1), ks = k.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(ch) * len))
    for (int c = 0; c < ch; ++c) {
        for (int u = 0; u < len; ++u) {
            T acc = T(0);
            for (int m = 0; m < ks; ++m) {
                const int t = u - m + pad;
                if (t >= 0 && t < len) acc += k.at(c, m) * gy.at(c, t);
            }
            gx.at(c, u) += acc;
        }
    }
}

template <typename T>
void depthwise_conv_grad_k(Tensor<T>& gk, const Tensor<T>& gy, const Tensor<T>& x, int pad) {
    const int ch = x.dim(0), len = x.dim(1), ks = gk.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(ch) * ks))
    for (int c = 0; c < ch; ++c) {
        for (int m = 0; m < ks; ++m) {
            T acc = T(0);
            for (int t = 0; t < len; ++t) {
                const int u = t + m - pad;
                if (u >= 0 && u < len) acc += gy.at(c, t) * x.at(c, u);
            }
            gk.at(c, m) += acc;
        }
    }
}

// y = a * b, a: m x k, b: k x n
template <typename T>
void matmul(Tensor<T>& y, const Tensor<T>& a, const Tensor<T>& b) {
    const int m = a.dim(0), kk = a.dim(1), n = b.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(m) * kk * n))
    for (int i = 0; i < m; ++i) {
        T* yi = &y.at(i, 0);
        for (int j = 0; j < n; ++j) yi[j] = T(0);
        for (int p = 0; p < kk; ++p) {
            const T av = a.at(i, p);
            const T* bp = &b.at(p, 0);
            for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
        }
    }
}

// y += a^T * b, a: k x m, b: k x n  (used by matmul backward)
template <typename T>
void matmul_at_b_acc(Tensor<T>& y, const Tensor<T>& a, const Tensor<T>& b) {
    const int kk = a.dim(0), m = a.dim(1), n = b.dim(1);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(m) * kk * n))
    for (int i = 0; i < m; ++i) {
        T* yi = &y.at(i, 0);
        for (int p = 0; p < kk; ++p) {
            const T av = a.at(p, i);
            const T* bp = &b.at(p, 0);
            for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
        }
    }
}

// y += a * b^T, a: m x k, b: n x k
template <typename T>
void matmul_a_bt_acc(Tensor<T>& y, const Tensor<T>& a, const Tensor<T>& b) {
    const int m = a.dim(0), kk = a.dim(1), n = b.dim(0);
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(m) * kk * n))
    for (int i = 0; i < m; ++i) {
        T* yi = &y.at(i, 0);
        for (int j = 0; j < n; ++j) {
            T acc = T(0);
            for (int p = 0; p < kk; ++p) acc += a.at(i, p) * b.at(j, p);
            yi[j] += acc;
        }
    }
}

// Diagonal selective scan over the time axis. Channels are independent,
// time is sequential. Layout: x, delta are D x S; b, c are H x S; a is
// D x H; y is D x S. hs (hidden states) and disc (abar and expm1(u)/a
// interleaved on the last axis, reused by the backward pass) are written
// here; hs is S x D x H, disc is S x D x 2H.
template <typename T>
void selective_scan(Tensor<T>& y, Tensor<T>& hs, Tensor<T>& disc, const Tensor<T>& x,
                    const Tensor<T>& delta, const Tensor<T>& b, const Tensor<T>& c,
                    const Tensor<T>& a) {
    const int d_ch = x.dim(0), steps = x.dim(1), h_sz = a.dim(1);
    bool bad = false;
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(d_ch) * steps * h_sz))
    for (int d = 0; d < d_ch; ++d) {
        for (int t = 0; t < steps; ++t) {
            T acc = T(0);
            const T dv = delta.at(d, t);
            const T xv = x.at(d, t);
            for (int i = 0; i < h_sz; ++i) {
                const T av = a.at(d, i);
                const T em1 = std::expm1(dv * av);
                const T abar = em1 + T(1);  // exp(u) exactly
                const T bbar_over_b = em1 / av;
                const T hprev = (t > 0) ? hs.at(t - 1, d, i) : T(0);
                const T h = abar * hprev + bbar_over_b * b.at(i, t) * xv;
                hs.at(t, d, i) = h;
                disc.at(t, d, 2 * i) = abar;
                disc.at(t, d, 2 * i + 1) = bbar_over_b;
                acc += c.at(i, t) * h;
            }
            if (!std::isfinite(static_cast<double>(acc))) bad = true;
            y.at(d, t) = acc;
        }
    }
    if (bad) {
        for (int t = 0; t < steps; ++t)
            for (int d = 0; d < d_ch; ++d)
                if (!std::isfinite(static_cast<double>(y.at(d, t))))
                    throw NumericError("selective_scan: non-finite state at step " +
                                       std::to_string(t));
    }
}

// Reverse pass of selective_scan; hs and disc come from the forward call.
template <typename T>
void selective_scan_grad(Tensor<T>& gx, Tensor<T>& gdelta, Tensor<T>& gb, Tensor<T>& gc,
                         Tensor<T>& ga, const Tensor<T>& gy, const Tensor<T>& hs,
                         const Tensor<T>& disc, const Tensor<T>& x, const Tensor<T>& delta,
                         const Tensor<T>& b, const Tensor<T>& c, const Tensor<T>& a) {
    const int d_ch = x.dim(0), steps = x.dim(1), h_sz = a.dim(1);
    // gb/gc accumulate across channels; parallelizing over d would race on
    // them, so contributions are buffered per channel row and reduced after.
    Tensor<T> gb_rows({d_ch, h_sz * steps});
    Tensor<T> gc_rows({d_ch, h_sz * steps});
#pragma omp parallel for schedule(static) if (parallelize(static_cast<int64_t>(d_ch) * steps * h_sz))
    for (int d = 0; d < d_ch; ++d) {
        std::vector<T> gh(static_cast<size_t>(h_sz), T(0));
        for (int t = steps - 1; t >= 0; --t) {
            const T gyv = gy.at(d, t);
            const T dv = delta.at(d, t);
            const T xv = x.at(d, t);
            T gx_acc = T(0), gd_acc = T(0);
            for (int i = 0; i < h_sz; ++i) {
                const T av = a.at(d, i);
                const T u = dv * av;
                const T abar = disc.at(t, d, 2 * i);
                const T bbar_over_b = disc.at(t, d, 2 * i + 1);
                const T em1 = abar - T(1);
                const T bv = b.at(i, t);
                const T h = hs.at(t, d, i);
                const T hprev = (t > 0) ? hs.at(t - 1, d, i) : T(0);

                T ghi = gh[static_cast<size_t>(i)] + gyv * c.at(i, t);
                gc_rows.at(d, i * steps + t) += gyv * h;

                const T g_abar = ghi * hprev;
                const T g_bbar = ghi * xv;
                gx_acc += ghi * bbar_over_b * bv;
                // d(abar)/d(delta) = a*abar; d(bbar)/d(delta) = abar*b
                gd_acc += g_abar * av * abar + g_bbar * abar * bv;
                // d(bbar)/d(a) = b*(delta*abar*a - (abar-1))/a^2, series for small u
                T dbbar_da;
                if (std::abs(static_cast<double>(u)) < 1e-4) {
                    dbbar_da = bv * dv * dv * (T(0.5) + u / T(3) + u * u / T(8));
                } else {
                    dbbar_da = bv * (dv * abar * av - em1) / (av * av);
                }
                ga.at(d, i) += g_abar * dv * abar + g_bbar * dbbar_da;
                gb_rows.at(d, i * steps + t) += g_bbar * bbar_over_b;
                gh[static_cast<size_t>(i)] = ghi * abar;
            }
            gx.at(d, t) += gx_acc;
            gdelta.at(d, t) += gd_acc;
        }
    }
    for (int i = 0; i < h_sz; ++i)
        for (int t = 0; t < steps; ++t) {
            T accb = T(0), accc = T(0);
            for (int d = 0; d < d_ch; ++d) {
                accb += gb_rows.at(d, i * steps + t);
                accc += gc_rows.at(d, i * steps + t);
            }
            gb.at(i, t) += accb;
            gc.at(i, t) += accc;
        }
}

}  // namespace mambaio::kernels
