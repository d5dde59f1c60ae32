#pragma once

#include <cstdint>

#include "slicing/nn/network.hpp"

namespace slicing {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::uint64_t step_count = 0;
    ParamMap m;
    ParamMap v;
    AdamConfig config;

    AdamState() = default;
    AdamState(const ParamMap& params, AdamConfig cfg);
};

// Thrown when a gradient contains NaN/Inf; names the offending tensor.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One bias-corrected Adam update. Every parameter must have a gradient of
// identical shape; grads are validated before anything is modified.
void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state);
void adam_step(Network& net, const ParamMap& grads, AdamState& state);

}  // namespace slicing
