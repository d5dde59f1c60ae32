#include "slicing/nn/adam.hpp"

#include <cmath>

#include "slicing/nn/kernels.hpp"

namespace slicing {

AdamState::AdamState(const ParamMap& params, AdamConfig cfg) : config(cfg) {
    for (const auto& [name, t] : params) {
        m.emplace(name, Tensor(t.shape(), 0.0));
        v.emplace(name, Tensor(t.shape(), 0.0));
    }
}

void adam_step(ParamMap& params, const ParamMap& grads, AdamState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam: parameter, gradient and moment maps differ in size");
    }
    for (const auto& [name, p] : params) {
        auto g = grads.find(name);
        auto m = state.m.find(name);
        auto v = state.v.find(name);
        if (g == grads.end() || m == state.m.end() || v == state.v.end()) {
            throw std::invalid_argument("adam: missing gradient or moment for '" + name + "'");
        }
        if (g->second.shape() != p.shape() || m->second.shape() != p.shape() || v->second.shape() != p.shape()) {
            throw std::invalid_argument("adam: shape mismatch for '" + name + "'");
        }
        if (!g->second.all_finite()) throw NonFiniteError("adam: non-finite gradient in '" + name + "'");
    }
    state.step_count += 1;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step_count);
    const kernels::AdamCoeffs coeffs{c.lr, c.beta1, c.beta2, c.epsilon, 1.0 - std::pow(c.beta1, t),
                                     1.0 - std::pow(c.beta2, t)};
    for (auto& [name, p] : params) {
        kernels::omp::adam_update(p.data(), grads.at(name).data(), state.m.at(name).data(),
                                  state.v.at(name).data(), p.size(), coeffs);
    }
}

void adam_step(Network& net, const ParamMap& grads, AdamState& state) {
    adam_step(net.mutable_params(), grads, state);
}

}  // namespace slicing
