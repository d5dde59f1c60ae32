#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "slicing/nn/tensor.hpp"

namespace slicing {

struct RidgeSolution {
    std::vector<double> x;
    // (max L_ii / min L_ii)^2 of the Cholesky factor; a cheap lower estimate
    // of cond(A^T A + lambda I).
    double condition_estimate = 1.0;
    bool ill_conditioned() const { return condition_estimate > 1e12; }
};

class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}
    double condition_estimate() const { return condition_; }

private:
    double condition_;
};

// Solves (A^T A + lambda I) x = A^T b through the normal equations and a
// Cholesky factorization. A is [n, p].
RidgeSolution ridge_solve_detailed(const Tensor& a, std::span<const double> b, double lambda);
std::vector<double> ridge_solve(const Tensor& a, std::span<const double> b, double lambda);

// Cholesky solve of a symmetric positive definite p x p system (row-major).
std::vector<double> cholesky_solve(std::vector<double> spd, std::span<const double> rhs, std::size_t p,
                                   double* condition_estimate = nullptr);

}  // namespace slicing
