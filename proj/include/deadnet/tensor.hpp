#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "deadnet/errors.hpp"

namespace deadnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

/// Dense row-major array. Images and activations use height x width x channels,
/// with an optional leading batch extent.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_size(shape_), fill);
    }

    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != shape_size(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<T> data() & noexcept { return data_; }
    std::span<const T> data() const& noexcept { return data_; }
    std::span<const T> data() && = delete;  // would dangle
    const std::vector<T>& values() const& noexcept { return data_; }
    std::vector<T> values() && noexcept { return std::move(data_); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // rank-3 (h, w, c) access
    T& at(std::size_t y, std::size_t x, std::size_t c) {
        return data_[(y * shape_[1] + x) * shape_[2] + c];
    }
    const T& at(std::size_t y, std::size_t x, std::size_t c) const {
        return data_[(y * shape_[1] + x) * shape_[2] + c];
    }

    // rank-4 (n, h, w, c) access
    T& at(std::size_t n, std::size_t y, std::size_t x, std::size_t c) {
        return data_[((n * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }
    const T& at(std::size_t n, std::size_t y, std::size_t x, std::size_t c) const {
        return data_[((n * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }

    BasicTensor reshaped(Shape shape) const {
        return BasicTensor(std::move(shape), data_);
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
        return BasicTensor<U>(shape_, std::move(out));
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        for (auto extent : shape_) {
            if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
void check_finite(const BasicTensor<T>& t, std::string_view where) {
    if (!t.all_finite()) throw NumericError("non-finite value in " + std::string(where));
}

template <typename T>
void require_shape(const BasicTensor<T>& t, const Shape& expected, std::string_view what) {
    if (t.shape() != expected) {
        throw ShapeError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                         shape_string(t.shape()));
    }
}

// Promotes an h x w x c image to a batch of one.
template <typename T>
BasicTensor<T> as_batch(const BasicTensor<T>& t) {
    if (t.rank() == 4) return t;
    if (t.rank() == 3) return t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)});
    if (t.rank() == 2) return t.reshaped({1, t.dim(0), t.dim(1), 1});
    throw ShapeError("cannot treat tensor of shape " + shape_string(t.shape()) + " as an image batch");
}

}  // namespace deadnet
