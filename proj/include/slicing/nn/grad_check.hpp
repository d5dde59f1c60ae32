#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slicing/nn/loss.hpp"
#include "slicing/nn/network.hpp"

namespace slicing {

// Scalar loss of the network output, with its gradient w.r.t. that output.
using LossFn = std::function<LossResult(const Tensor& output)>;
using BackwardFn = std::function<Gradients(const Network&, const Tape&, const Tensor&)>;

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t probes = 5;  // random coordinates per tensor
    double tolerance = 1e-4;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string name;  // parameter name or "input"
    std::size_t probes = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = true;
};

// Compares backward() against central finite differences on random probes of
// every parameter tensor and of the input.
GradCheckReport grad_check(const Network& net, const Tensor& input, const LossFn& loss,
                           const GradCheckOptions& options = {}, const BackwardFn& backward = backward_pass);

// Loss <c, output> for a fixed random c: exercises every output coordinate.
LossFn random_linear_loss(const Shape& output_shape, std::uint64_t seed);

double relative_error(double analytic, double numeric);

}  // namespace slicing
