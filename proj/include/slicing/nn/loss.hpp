#pragma once

#include <span>
#include <vector>

#include "slicing/nn/tensor.hpp"

namespace slicing {

struct LossResult {
    double loss = 0.0;
    Tensor grad;
};

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

// -log softmax(logits)[label]; grad = softmax - onehot(label).
LossResult softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// Mean of squared differences; grad = 2 (pred - target) / n.
LossResult mse_loss(const Tensor& pred, const Tensor& target);
LossResult mse_loss(std::span<const double> pred, std::span<const double> target);

}  // namespace slicing
