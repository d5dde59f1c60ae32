#include "slicing/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slicing {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    for (auto d : shape_) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_str(shape_));
    }
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive: " + shape_str(shape_));
    }
    if (shape_size(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::from_span(Shape shape, std::span<const double> values) {
    return Tensor(std::move(shape), std::vector<double>(values.begin(), values.end()));
}

std::span<double> Tensor::row(std::size_t i) {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<double>(data_).subspan(i * stride, stride);
}

std::span<const double> Tensor::row(std::size_t i) const {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<const double>(data_).subspan(i * stride, stride);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace slicing
