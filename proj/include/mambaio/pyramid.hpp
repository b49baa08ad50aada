#pragma once

#include <cmath>
#include <vector>

#include "mambaio/errors.hpp"
#include "mambaio/kernels.hpp"
#include "mambaio/tensor.hpp"

namespace mambaio::pyramid {

template <typename T>
struct FrequencyBands {
    Tensor<T> low;              // C x L
    Tensor<T> high;             // C x L, the residual x - low
    Tensor<T> low_downsampled;  // C x (L/s)
};

// Strided averaging with edge-replicate padding: the fixed low-pass stage.
// out[c,j] = mean of x[c, s*j - p .. s*j - p + k - 1] with indices clamped.
template <typename T>
Tensor<T> lowpass_downsample(const Tensor<T>& x, int kernel, int stride) {
    const int ch = x.dim(0), len = x.dim(1);
    const int pad = (kernel - 1) / 2;
    const int lout = (len + 2 * pad - kernel) / stride + 1;
    Tensor<T> out({ch, lout});
    const T w = T(1) / T(kernel);
#pragma omp parallel for schedule(static) if (kernels::parallelize(static_cast<int64_t>(ch) * lout))
    for (int c = 0; c < ch; ++c)
        for (int j = 0; j < lout; ++j) {
            T acc = T(0);
            for (int m = 0; m < kernel; ++m) {
                int u = stride * j - pad + m;
                u = u < 0 ? 0 : (u >= len ? len - 1 : u);
                acc += x.at(c, u);
            }
            out.at(c, j) = acc * w;
        }
    return out;
}

// Nearest-neighbor upsample: out[t] = in[t / s].
template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int stride, int lout) {
    const int ch = x.dim(0);
    Tensor<T> out({ch, lout});
    for (int c = 0; c < ch; ++c)
        for (int t = 0; t < lout; ++t) out.at(c, t) = x.at(c, t / stride);
    return out;
}

// Single-level split of a windowed signal into a smooth low band, its
// downsampled form, and the residual detail band high = x - low.
//
// Reconstruction low + high re-rounds once: it reproduces x bitwise
// whenever x and low share a binade (Sterbenz) and to within one ulp of
// the larger band otherwise. A bitwise guarantee for arbitrary doubles is
// not achievable: when |low| > 2|x|, the sums of representable (low, high)
// pairs live on a grid coarser than ulp(x) and can miss x entirely.
template <typename T>
FrequencyBands<T> decompose(const Tensor<T>& x, int kernel = 5, int stride = 2) {
    if (x.rank() != 2) throw ShapeError("decompose: expected a C x L window");
    const int len = x.dim(1);
    if (len % 2 != 0) throw ContractError("decompose: invalid window, L must be even");
    if (kernel % 2 == 0) throw ContractError("decompose: kernel size must be odd");
    if (kernel > len) throw ContractError("decompose: kernel longer than the window");
    if (stride != 2) throw ContractError("decompose: stride must be 2");

    FrequencyBands<T> bands;
    bands.low_downsampled = lowpass_downsample(x, kernel, stride);
    bands.low = upsample_nearest(bands.low_downsampled, stride, len);
    bands.high = Tensor<T>(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) bands.high[i] = x[i] - bands.low[i];
    return bands;
}

// Adjoint of the linear map x -> (low, high). high = x - low gives
// grad_x = grad_high + U^T (grad_low - grad_high) with U the
// upsample-of-average operator.
template <typename T>
Tensor<T> decompose_backward(const Tensor<T>& grad_low, const Tensor<T>& grad_high,
                             int kernel = 5, int stride = 2) {
    if (!grad_low.same_shape(grad_high))
        throw ShapeError("decompose_backward: band gradient shapes differ");
    const int ch = grad_low.dim(0), len = grad_low.dim(1);
    const int pad = (kernel - 1) / 2;
    const int lds = len / stride;
    const T w = T(1) / T(kernel);

    Tensor<T> gx(grad_low.shape());
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] = grad_high[i];
#pragma omp parallel for schedule(static) if (kernels::parallelize(static_cast<int64_t>(ch) * len))
    for (int c = 0; c < ch; ++c) {
        for (int j = 0; j < lds; ++j) {
            // upsample adjoint: sum the s copies of sample j
            T g = T(0);
            for (int r = 0; r < stride; ++r) {
                const int t = j * stride + r;
                if (t < len) g += grad_low.at(c, t) - grad_high.at(c, t);
            }
            // averaging adjoint with clamped taps
            for (int m = 0; m < kernel; ++m) {
                int u = stride * j - pad + m;
                u = u < 0 ? 0 : (u >= len ? len - 1 : u);
                gx.at(c, u) += g * w;
            }
        }
    }
    return gx;
}

// Recursive variant: level i+1 decomposes level i's low_downsampled.
template <typename T>
std::vector<FrequencyBands<T>> decompose_multi(const Tensor<T>& x, int kernel, int stride,
                                               int depth) {
    if (depth < 1) throw ContractError("decompose: depth must be >= 1");
    std::vector<FrequencyBands<T>> levels;
    Tensor<T> cur = x;
    for (int d = 0; d < depth; ++d) {
        levels.push_back(decompose(cur, kernel, stride));
        cur = levels.back().low_downsampled;
    }
    return levels;
}

}  // namespace mambaio::pyramid
