#include "slicing/nn/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

namespace slicing {

std::vector<double> cholesky_solve(std::vector<double> s, std::span<const double> rhs, std::size_t p,
                                   double* condition_estimate) {
    if (s.size() != p * p || rhs.size() != p) throw std::invalid_argument("cholesky_solve: size mismatch");
    double max_diag = 0.0;
    for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, std::abs(s[i * p + i]));
    // In-place lower factor.
    double lmin = std::numeric_limits<double>::infinity(), lmax = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double d = s[j * p + j];
        for (std::size_t k = 0; k < j; ++k) d -= s[j * p + k] * s[j * p + k];
        if (!(d > max_diag * 1e-15) || max_diag == 0.0) {
            const double cond = d > 0.0 ? (max_diag / d) : std::numeric_limits<double>::infinity();
            throw SingularSystemError("singular normal equations at column " + std::to_string(j) +
                                          " (pivot " + std::to_string(d) + ", condition estimate " +
                                          std::to_string(cond) + ")",
                                      cond);
        }
        const double ljj = std::sqrt(d);
        s[j * p + j] = ljj;
        lmin = std::min(lmin, ljj);
        lmax = std::max(lmax, ljj);
        for (std::size_t i = j + 1; i < p; ++i) {
            double v = s[i * p + j];
            for (std::size_t k = 0; k < j; ++k) v -= s[i * p + k] * s[j * p + k];
            s[i * p + j] = v / ljj;
        }
    }
    std::vector<double> y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= s[i * p + k] * y[k];
        y[i] /= s[i * p + i];
    }
    for (std::size_t ii = p; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < p; ++k) y[ii] -= s[k * p + ii] * y[k];
        y[ii] /= s[ii * p + ii];
    }
    if (condition_estimate) *condition_estimate = (lmax / lmin) * (lmax / lmin);
    return y;
}

RidgeSolution ridge_solve_detailed(const Tensor& a, std::span<const double> b, double lambda) {
    if (a.rank() != 2) throw std::invalid_argument("ridge_solve: A must be a matrix");
    const std::size_t n = a.dim(0), p = a.dim(1);
    if (b.size() != n) {
        throw std::invalid_argument("ridge_solve: b has " + std::to_string(b.size()) + " entries, A has " +
                                    std::to_string(n) + " rows");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("ridge_solve: lambda must be >= 0");

    std::vector<double> ata(p * p, 0.0);
    std::vector<double> atb(p, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = a.data() + r * p;
        for (std::size_t i = 0; i < p; ++i) {
            if (row[i] == 0.0) continue;
            for (std::size_t j = 0; j <= i; ++j) ata[i * p + j] += row[i] * row[j];
            atb[i] += row[i] * b[r];
        }
    }
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < i; ++j) ata[j * p + i] = ata[i * p + j];
        ata[i * p + i] += lambda;
    }
    RidgeSolution sol;
    sol.x = cholesky_solve(std::move(ata), atb, p, &sol.condition_estimate);
    if (sol.ill_conditioned()) {
        std::cerr << "ridge_solve: condition estimate " << sol.condition_estimate << " exceeds 1e12\n";
    }
    return sol;
}

std::vector<double> ridge_solve(const Tensor& a, std::span<const double> b, double lambda) {
    return ridge_solve_detailed(a, b, lambda).x;
}

}  // namespace slicing
