#include "slicing/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slicing {

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

LossResult softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
    if (logits.size() < 2) throw std::invalid_argument("cross entropy needs at least 2 classes");
    if (label >= logits.size()) {
        throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                    std::to_string(logits.size()) + " classes");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double log_z = std::log(z);
    LossResult r;
    r.loss = -(logits[label] - mx - log_z);
    r.grad = Tensor({logits.size()});
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - mx - log_z);
    r.grad[label] -= 1.0;
    return r;
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw std::invalid_argument("mse shapes differ: " + std::to_string(pred.size()) + " vs " +
                                    std::to_string(target.size()));
    }
    const double n = static_cast<double>(pred.size());
    LossResult r;
    r.grad = Tensor({pred.size()});
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.loss = acc / n;
    return r;
}

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw std::invalid_argument("mse shapes differ: " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    }
    auto r = mse_loss(pred.span(), target.span());
    r.grad = r.grad.reshaped(pred.shape());
    return r;
}

}  // namespace slicing
