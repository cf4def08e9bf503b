#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bvae/errors.hpp"

namespace bvae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

// Dense row-major n-dimensional array. The scalar type is a template
// parameter so that training runs in float while gradient checks run in
// double through the same code.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_extents();
    }

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (shape_size(shape_) != data_.size()) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t row, std::size_t col) { return data_[row * shape_.back() + col]; }
    const T& at(std::size_t row, std::size_t col) const { return data_[row * shape_.back() + col]; }

    // Contiguous slice along the leading axis.
    std::span<T> row(std::size_t i) {
        const std::size_t stride = data_.size() / shape_.front();
        return {data_.data() + i * stride, stride};
    }
    std::span<const T> row(std::size_t i) const {
        const std::size_t stride = data_.size() / shape_.front();
        return {data_.data() + i * stride, stride};
    }

    BasicTensor reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size()) {
            throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        }
        return BasicTensor(std::move(shape), data_);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    bool operator==(const BasicTensor&) const = default;

private:
    void check_extents() const {
        for (std::size_t e : shape_) {
            if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& in) {
    std::vector<To> out(in.size());
    std::transform(in.values().begin(), in.values().end(), out.begin(),
                   [](From v) { return static_cast<To>(v); });
    return BasicTensor<To>(in.shape(), std::move(out));
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), T{0});
}

} // namespace bvae
