#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latent_invert/error.hpp"

namespace latent_invert {

using Shape = std::vector<std::size_t>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline void check_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
    for (std::size_t e : shape)
        if (e == 0) throw ShapeError("tensor extent must be positive, got " + shape_string(shape));
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& values) {
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (!std::isfinite(values.derived().coeff(i))) return false;
    return true;
}

/// Dense row-major n-d array. Storage is a single Eigen column vector so the
/// flat payload can be handed to Eigen expressions without copies.
template <typename Scalar>
class Tensor {
public:
    using scalar_type = Scalar;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        check_shape(shape_);
        data_ = Vector<Scalar>::Zero(static_cast<Eigen::Index>(shape_numel(shape_)));
    }

    Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape(shape_);
        if (static_cast<std::size_t>(data_.size()) != shape_numel(shape_))
            throw ShapeError("payload length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
        if (!all_finite(data_)) throw NumericalError("tensor payload contains non-finite values");
    }

    Tensor(Shape shape, std::initializer_list<Scalar> values)
        : Tensor(std::move(shape), from_list(values)) {}

    static Tensor filled(Shape shape, Scalar value) {
        Tensor t(std::move(shape));
        t.data_.setConstant(value);
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
    bool empty() const { return shape_.empty(); }

    const Vector<Scalar>& values() const { return data_; }
    Vector<Scalar>& values() { return data_; }
    const Scalar* data() const { return data_.data(); }
    Scalar* data() { return data_.data(); }

    Scalar operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }
    Scalar& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }

    /// 2-D access, last axis fastest.
    Scalar operator()(std::size_t i, std::size_t j) const {
        return data_[static_cast<Eigen::Index>(i * shape_[1] + j)];
    }
    Scalar& operator()(std::size_t i, std::size_t j) {
        return data_[static_cast<Eigen::Index>(i * shape_[1] + j)];
    }

    /// Number of elements per index of the leading axis.
    std::size_t row_size() const { return shape_.empty() ? 0 : size() / shape_[0]; }

    Shape row_shape() const { return Shape(shape_.begin() + 1, shape_.end()); }

    /// Copy of slice `b` along the leading axis into a freshly allocated vector.
    Vector<Scalar> row(std::size_t b) const {
        const auto n = static_cast<Eigen::Index>(row_size());
        return data_.segment(static_cast<Eigen::Index>(b) * n, n);
    }

    template <typename Derived>
    void set_row(std::size_t b, const Eigen::MatrixBase<Derived>& v) {
        const auto n = static_cast<Eigen::Index>(row_size());
        if (v.size() != n) throw ShapeError("row length mismatch");
        data_.segment(static_cast<Eigen::Index>(b) * n, n) = v;
    }

    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != size())
            throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    template <typename NewScalar>
    Tensor<NewScalar> cast() const {
        return Tensor<NewScalar>(shape_, data_.template cast<NewScalar>().eval());
    }

    /// Stack equally shaped tensors along a new leading axis.
    static Tensor stack(const std::vector<Tensor>& items) {
        if (items.empty()) throw ShapeError("cannot stack zero tensors");
        Shape shape{items.size()};
        shape.insert(shape.end(), items.front().shape_.begin(), items.front().shape_.end());
        Tensor out(shape);
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].shape_ != items.front().shape_) throw ShapeError("stack: shape mismatch");
            out.set_row(i, items[i].data_);
        }
        return out;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static Vector<Scalar> from_list(std::initializer_list<Scalar> values) {
        Vector<Scalar> v(static_cast<Eigen::Index>(values.size()));
        Eigen::Index i = 0;
        for (Scalar x : values) v[i++] = x;
        return v;
    }

    Shape shape_;
    Vector<Scalar> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

template <typename Scalar, typename Expr>
Tensor<Scalar> finish(const Shape& shape, const Expr& expr, const char* op) {
    Vector<Scalar> v = expr;
    if (!all_finite(v)) throw NumericalError(std::string(op) + " produced non-finite values");
    return Tensor<Scalar>(shape, std::move(v));
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::require_same_shape(a, b, "add");
    return detail::finish<Scalar>(a.shape(), a.values() + b.values(), "add");
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::require_same_shape(a, b, "sub");
    return detail::finish<Scalar>(a.shape(), a.values() - b.values(), "sub");
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::require_same_shape(a, b, "mul");
    return detail::finish<Scalar>(a.shape(), a.values().cwiseProduct(b.values()), "mul");
}

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    detail::require_same_shape(a, b, "div");
    return detail::finish<Scalar>(a.shape(), a.values().cwiseQuotient(b.values()), "div");
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, Scalar s) {
    return detail::finish<Scalar>(a.shape(), (a.values().array() + s).matrix(), "add");
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, Scalar s) {
    return detail::finish<Scalar>(a.shape(), (a.values().array() - s).matrix(), "sub");
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, Scalar s) {
    return detail::finish<Scalar>(a.shape(), a.values() * s, "mul");
}

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, Scalar s) {
    return detail::finish<Scalar>(a.shape(), a.values() / s, "div");
}

/// Sum of all elements, accumulated in double.
template <typename Scalar>
double sum(const Tensor<Scalar>& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += static_cast<double>(t[i]);
    return acc;
}

template <typename Scalar>
double mean(const Tensor<Scalar>& t) {
    if (t.size() == 0) throw ShapeError("mean of an empty tensor");
    return sum(t) / static_cast<double>(t.size());
}

}  // namespace latent_invert
