#pragma once

// Numerical kernels behind the layer algebra. Every kernel exists twice:
// `serial` is the reference used by tests, `omp` splits the outermost
// independent loop across OpenMP threads. Both share the per-element inner
// loops, so each output element is accumulated in the same order and the two
// variants agree bitwise.

#include <cstddef>

namespace slicing::kernels {

struct ConvGeom {
    std::size_t batch, in_ch, in_h, in_w;
    std::size_t out_ch, kernel, stride, pad;
    std::size_t out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    std::size_t out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

struct AdamCoeffs {
    double lr, beta1, beta2, epsilon;
    double bias1, bias2;  // 1 - beta^t
};

// Fixed-association dot product (8 partial sums, combined pairwise).
double dot(const double* a, const double* b, std::size_t n);

#define SLICING_KERNEL_DECLS                                                                        \
    /* y[B,out] = x[B,in] * W[out,in]^T + b[out] */                                                 \
    void dense_forward(const double* x, const double* w, const double* b, double* y, std::size_t batch, \
                       std::size_t in, std::size_t out);                                            \
    /* dx[B,in] = dy[B,out] * W[out,in] */                                                          \
    void dense_backward_input(const double* dy, const double* w, double* dx, std::size_t batch,     \
                              std::size_t in, std::size_t out);                                     \
    /* dW[out,in] = dy^T x, db[out] = sum_b dy (overwrites) */                                      \
    void dense_backward_params(const double* dy, const double* x, double* dw, double* db,           \
                               std::size_t batch, std::size_t in, std::size_t out);                 \
    void conv2d_forward(const double* x, const double* w, const double* b, double* y, const ConvGeom& g); \
    void conv2d_backward_input(const double* dy, const double* w, double* dx, const ConvGeom& g);   \
    void conv2d_backward_params(const double* dy, const double* x, double* dw, double* db,          \
                                const ConvGeom& g);                                                 \
    void relu_forward(const double* x, double* y, std::size_t n);                                   \
    void relu_backward(const double* x, const double* dy, double* dx, std::size_t n);               \
    void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n,        \
                     const AdamCoeffs& c);

namespace serial {
SLICING_KERNEL_DECLS
}  // namespace serial

namespace omp {
SLICING_KERNEL_DECLS
}  // namespace omp

#undef SLICING_KERNEL_DECLS

}  // namespace slicing::kernels
