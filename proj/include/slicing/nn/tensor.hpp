#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace slicing {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. The shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::initializer_list<double> values);
    static Tensor from_span(Shape shape, std::span<const double> values);

    const Shape& shape() const { return shape_; }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> span() { return data_; }
    std::span<const double> span() const { return data_; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // View of row `i` along the leading axis.
    std::span<double> row(std::size_t i);
    std::span<const double> row(std::size_t i) const;

    // Same data, new shape with equal element count.
    Tensor reshaped(Shape shape) const;

    void fill(double value);
    bool all_finite() const;
    double max_abs() const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

}  // namespace slicing
