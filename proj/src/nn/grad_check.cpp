#include "slicing/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "slicing/rng.hpp"

namespace slicing {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> probe_indices(std::size_t size, std::size_t probes, Rng& rng) {
    std::vector<std::size_t> idx;
    if (size <= probes) {
        for (std::size_t i = 0; i < size; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t k = 0; k < probes; ++k) idx.push_back(static_cast<std::size_t>(rng.uniform_int(0, size - 1)));
    return idx;
}

}  // namespace

GradCheckReport grad_check(const Network& net, const Tensor& input, const LossFn& loss,
                           const GradCheckOptions& options, const BackwardFn& backward) {
    GradCheckReport report;
    auto fwd = forward_pass(net, input);
    const auto base = loss(fwd.output);
    const Gradients grads = backward(net, fwd.tape, base.grad);

    Rng rng(options.seed);
    Network probe = net;
    const double h = options.step;

    auto record = [&](GradCheckEntry e) {
        report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
        if (!(e.max_rel_error < options.tolerance)) report.passed = false;
        report.entries.push_back(std::move(e));
    };

    for (const auto& [name, tensor] : net.params()) {
        GradCheckEntry e{name, 0, 0.0};
        const Tensor& analytic = grads.params.at(name);
        for (auto i : probe_indices(tensor.size(), options.probes, rng)) {
            const double orig = tensor[i];
            probe.mutable_params().at(name)[i] = orig + h;
            const double lp = loss(infer(probe, input)).loss;
            probe.mutable_params().at(name)[i] = orig - h;
            const double lm = loss(infer(probe, input)).loss;
            probe.mutable_params().at(name)[i] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic[i], numeric));
            ++e.probes;
        }
        record(std::move(e));
    }

    GradCheckEntry e{"input", 0, 0.0};
    Tensor x = input;
    for (auto i : probe_indices(x.size(), options.probes, rng)) {
        const double orig = x[i];
        x[i] = orig + h;
        const double lp = loss(infer(net, x)).loss;
        x[i] = orig - h;
        const double lm = loss(infer(net, x)).loss;
        x[i] = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        e.max_rel_error = std::max(e.max_rel_error, relative_error(grads.input[i], numeric));
        ++e.probes;
    }
    record(std::move(e));
    return report;
}

LossFn random_linear_loss(const Shape& output_shape, std::uint64_t seed) {
    Rng rng(seed);
    auto c = std::make_shared<Tensor>(output_shape);
    for (auto& v : c->values()) v = rng.uniform(-1.0, 1.0);
    return [c](const Tensor& out) {
        if (out.shape() != c->shape()) throw std::invalid_argument("linear loss: unexpected output shape");
        LossResult r;
        for (std::size_t i = 0; i < out.size(); ++i) r.loss += (*c)[i] * out[i];
        r.grad = *c;
        return r;
    };
}

}  // namespace slicing
