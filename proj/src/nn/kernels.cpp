#include "slicing/nn/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace slicing::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

using idx = std::int64_t;

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <bool Par>
void dense_forward_impl(const double* x, const double* w, const double* b, double* y, std::size_t batch,
                        std::size_t in, std::size_t out) {
    const idx total = static_cast<idx>(batch * out);
    const bool par = Par && batch * out * in >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx k = 0; k < total; ++k) {
        const std::size_t r = static_cast<std::size_t>(k) / out;
        const std::size_t o = static_cast<std::size_t>(k) % out;
        y[k] = b[o] + dot(x + r * in, w + o * in, in);
    }
}

template <bool Par>
void dense_backward_input_impl(const double* dy, const double* w, double* dx, std::size_t batch,
                               std::size_t in, std::size_t out) {
    // Columns of dx are split into blocks; within a block the sum over `out`
    // always runs in ascending order.
    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (in + kBlock - 1) / kBlock;
    const idx total = static_cast<idx>(batch * blocks);
    const bool par = Par && batch * out * in >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx k = 0; k < total; ++k) {
        const std::size_t r = static_cast<std::size_t>(k) / blocks;
        const std::size_t lo = (static_cast<std::size_t>(k) % blocks) * kBlock;
        const std::size_t len = lo + kBlock <= in ? kBlock : in - lo;
        double* dst = dx + r * in + lo;
        for (std::size_t i = 0; i < len; ++i) dst[i] = 0.0;
        const double* g = dy + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            if (g[o] != 0.0) axpy(g[o], w + o * in + lo, dst, len);
        }
    }
}

template <bool Par>
void dense_backward_params_impl(const double* dy, const double* x, double* dw, double* db, std::size_t batch,
                                std::size_t in, std::size_t out) {
    const bool par = Par && batch * out * in >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx oi = 0; oi < static_cast<idx>(out); ++oi) {
        const auto o = static_cast<std::size_t>(oi);
        double* row = dw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] = 0.0;
        double bias = 0.0;
        for (std::size_t r = 0; r < batch; ++r) {
            const double g = dy[r * out + o];
            bias += g;
            if (g != 0.0) axpy(g, x + r * in, row, in);
        }
        db[o] = bias;
    }
}

template <bool Par>
void conv2d_forward_impl(const double* x, const double* w, const double* b, double* y, const ConvGeom& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    const idx total = static_cast<idx>(g.batch * g.out_ch);
    const bool par = Par && g.batch * g.out_ch * oh * ow * g.in_ch * k * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx t = 0; t < total; ++t) {
        const std::size_t n = static_cast<std::size_t>(t) / g.out_ch;
        const std::size_t o = static_cast<std::size_t>(t) % g.out_ch;
        double* dst = y + (n * g.out_ch + o) * oh * ow;
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t c = 0; c < ow; ++c) {
                double acc = b[o];
                for (std::size_t ch = 0; ch < g.in_ch; ++ch) {
                    const double* src = x + (n * g.in_ch + ch) * g.in_h * g.in_w;
                    const double* wk = w + (o * g.in_ch + ch) * k * k;
                    for (std::size_t ki = 0; ki < k; ++ki) {
                        const idx ih = static_cast<idx>(r * g.stride + ki) - static_cast<idx>(g.pad);
                        if (ih < 0 || ih >= static_cast<idx>(g.in_h)) continue;
                        for (std::size_t kj = 0; kj < k; ++kj) {
                            const idx iw = static_cast<idx>(c * g.stride + kj) - static_cast<idx>(g.pad);
                            if (iw < 0 || iw >= static_cast<idx>(g.in_w)) continue;
                            acc += wk[ki * k + kj] * src[ih * static_cast<idx>(g.in_w) + iw];
                        }
                    }
                }
                dst[r * ow + c] = acc;
            }
        }
    }
}

template <bool Par>
void conv2d_backward_input_impl(const double* dy, const double* w, double* dx, const ConvGeom& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    const idx total = static_cast<idx>(g.batch * g.in_ch);
    const bool par = Par && g.batch * g.out_ch * oh * ow * g.in_ch * k * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx t = 0; t < total; ++t) {
        const std::size_t n = static_cast<std::size_t>(t) / g.in_ch;
        const std::size_t ch = static_cast<std::size_t>(t) % g.in_ch;
        double* dst = dx + (n * g.in_ch + ch) * g.in_h * g.in_w;
        for (std::size_t i = 0; i < g.in_h * g.in_w; ++i) dst[i] = 0.0;
        for (std::size_t o = 0; o < g.out_ch; ++o) {
            const double* grad = dy + (n * g.out_ch + o) * oh * ow;
            const double* wk = w + (o * g.in_ch + ch) * k * k;
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t c = 0; c < ow; ++c) {
                    const double gv = grad[r * ow + c];
                    if (gv == 0.0) continue;
                    for (std::size_t ki = 0; ki < k; ++ki) {
                        const idx ih = static_cast<idx>(r * g.stride + ki) - static_cast<idx>(g.pad);
                        if (ih < 0 || ih >= static_cast<idx>(g.in_h)) continue;
                        for (std::size_t kj = 0; kj < k; ++kj) {
                            const idx iw = static_cast<idx>(c * g.stride + kj) - static_cast<idx>(g.pad);
                            if (iw < 0 || iw >= static_cast<idx>(g.in_w)) continue;
                            dst[ih * static_cast<idx>(g.in_w) + iw] += gv * wk[ki * k + kj];
                        }
                    }
                }
            }
        }
    }
}

template <bool Par>
void conv2d_backward_params_impl(const double* dy, const double* x, double* dw, double* db, const ConvGeom& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
    const bool par = Par && g.batch * g.out_ch * oh * ow * g.in_ch * k * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx oi = 0; oi < static_cast<idx>(g.out_ch); ++oi) {
        const auto o = static_cast<std::size_t>(oi);
        double* wk_all = dw + o * g.in_ch * k * k;
        for (std::size_t i = 0; i < g.in_ch * k * k; ++i) wk_all[i] = 0.0;
        double bias = 0.0;
        for (std::size_t n = 0; n < g.batch; ++n) {
            const double* grad = dy + (n * g.out_ch + o) * oh * ow;
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t c = 0; c < ow; ++c) {
                    const double gv = grad[r * ow + c];
                    bias += gv;
                    if (gv == 0.0) continue;
                    for (std::size_t ch = 0; ch < g.in_ch; ++ch) {
                        const double* src = x + (n * g.in_ch + ch) * g.in_h * g.in_w;
                        double* wk = wk_all + ch * k * k;
                        for (std::size_t ki = 0; ki < k; ++ki) {
                            const idx ih = static_cast<idx>(r * g.stride + ki) - static_cast<idx>(g.pad);
                            if (ih < 0 || ih >= static_cast<idx>(g.in_h)) continue;
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                const idx iw = static_cast<idx>(c * g.stride + kj) - static_cast<idx>(g.pad);
                                if (iw < 0 || iw >= static_cast<idx>(g.in_w)) continue;
                                wk[ki * k + kj] += gv * src[ih * static_cast<idx>(g.in_w) + iw];
                            }
                        }
                    }
                }
            }
        }
        db[o] = bias;
    }
}

template <bool Par>
void relu_forward_impl(const double* x, double* y, std::size_t n) {
    const bool par = Par && n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx i = 0; i < static_cast<idx>(n); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

template <bool Par>
void relu_backward_impl(const double* x, const double* dy, double* dx, std::size_t n) {
    const bool par = Par && n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx i = 0; i < static_cast<idx>(n); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

template <bool Par>
void adam_update_impl(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoeffs& c) {
    const bool par = Par && n >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
    for (idx i = 0; i < static_cast<idx>(n); ++i) {
        const double g = grad[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = m[i] / c.bias1;
        const double v_hat = v[i] / c.bias2;
        param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    }
    for (std::size_t l = 0; i < n; ++i, ++l) acc[l] += a[i] * b[i];
    return ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7]));
}

#define SLICING_KERNEL_DEFS(NS, PAR)                                                                      \
    namespace NS {                                                                                        \
    void dense_forward(const double* x, const double* w, const double* b, double* y, std::size_t batch,   \
                       std::size_t in, std::size_t out) {                                                 \
        dense_forward_impl<PAR>(x, w, b, y, batch, in, out);                                              \
    }                                                                                                     \
    void dense_backward_input(const double* dy, const double* w, double* dx, std::size_t batch,           \
                              std::size_t in, std::size_t out) {                                          \
        dense_backward_input_impl<PAR>(dy, w, dx, batch, in, out);                                        \
    }                                                                                                     \
    void dense_backward_params(const double* dy, const double* x, double* dw, double* db,                 \
                               std::size_t batch, std::size_t in, std::size_t out) {                      \
        dense_backward_params_impl<PAR>(dy, x, dw, db, batch, in, out);                                   \
    }                                                                                                     \
    void conv2d_forward(const double* x, const double* w, const double* b, double* y, const ConvGeom& g) { \
        conv2d_forward_impl<PAR>(x, w, b, y, g);                                                          \
    }                                                                                                     \
    void conv2d_backward_input(const double* dy, const double* w, double* dx, const ConvGeom& g) {        \
        conv2d_backward_input_impl<PAR>(dy, w, dx, g);                                                    \
    }                                                                                                     \
    void conv2d_backward_params(const double* dy, const double* x, double* dw, double* db,                \
                                const ConvGeom& g) {                                                      \
        conv2d_backward_params_impl<PAR>(dy, x, dw, db, g);                                               \
    }                                                                                                     \
    void relu_forward(const double* x, double* y, std::size_t n) { relu_forward_impl<PAR>(x, y, n); }     \
    void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {                    \
        relu_backward_impl<PAR>(x, dy, dx, n);                                                            \
    }                                                                                                     \
    void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,              \
                     const AdamCoeffs& c) {                                                               \
        adam_update_impl<PAR>(param, grad, m, v, n, c);                                                   \
    }                                                                                                     \
    }

SLICING_KERNEL_DEFS(serial, false)
SLICING_KERNEL_DEFS(omp, true)

#undef SLICING_KERNEL_DEFS

}  // namespace slicing::kernels
