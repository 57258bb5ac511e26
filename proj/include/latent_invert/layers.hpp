#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

#include "latent_invert/tensor.hpp"

namespace latent_invert {

/// Tag values are part of the GANW file format; do not renumber.
enum class LayerKind : std::uint8_t {
    Dense = 0,
    ConvTranspose2d = 1,
    BatchNormInference = 2,
    ReLU = 3,
    LeakyReLU = 4,
    Tanh = 5,
    Sigmoid = 6,
    Reshape = 7,
};

inline const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::ConvTranspose2d: return "ConvTranspose2d";
        case LayerKind::BatchNormInference: return "BatchNormInference";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::LeakyReLU: return "LeakyReLU";
        case LayerKind::Tanh: return "Tanh";
        case LayerKind::Sigmoid: return "Sigmoid";
        case LayerKind::Reshape: return "Reshape";
    }
    return "Unknown";
}

/// y = W x + b with W stored [out, in].
template <typename Scalar>
struct Dense {
    static constexpr LayerKind kind = LayerKind::Dense;
    static constexpr bool saves_output = false;

    RowMajorMatrix<Scalar> weight;
    Vector<Scalar> bias;

    Shape output_shape(const Shape& in) const {
        if (bias.size() != weight.rows())
            throw ShapeError("Dense: bias length " + std::to_string(bias.size()) + " != out features " +
                             std::to_string(weight.rows()));
        if (in.size() != 1 || static_cast<Eigen::Index>(in[0]) != weight.cols())
            throw ShapeError("Dense: expects input [" + std::to_string(weight.cols()) + "], got " +
                             shape_string(in));
        return {static_cast<std::size_t>(weight.rows())};
    }

    Vector<Scalar> forward(const Shape&, const Vector<Scalar>& x) const {
        return weight * x + bias;
    }

    Vector<Scalar> backward(const Shape&, const Vector<Scalar>&, const Vector<Scalar>& upstream) const {
        return weight.transpose() * upstream;
    }

    template <typename T>
    Dense<T> cast() const {
        return {weight.template cast<T>(), bias.template cast<T>()};
    }
};

/// Transposed 2-D convolution over channel-major [C, H, W] activations: the
/// adjoint of a strided convolution. Each input pixel (ih, iw) scatters its
/// kernel window to output rows ih*stride - padding + ki, columns
/// iw*stride - padding + kj; contributions falling outside the output are
/// dropped. Output extent per axis is (in - 1) * stride - 2 * padding + kernel.
///
/// The kernel [in_ch, out_ch, kh, kw] is held as a row-major
/// [in_ch, out_ch*kh*kw] matrix so forward is a GEMM followed by col2im and
/// the input VJP is im2col followed by a GEMM.
template <typename Scalar>
struct ConvTranspose2d {
    static constexpr LayerKind kind = LayerKind::ConvTranspose2d;
    static constexpr bool saves_output = false;

    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    RowMajorMatrix<Scalar> kernel;
    Vector<Scalar> bias;

    ConvTranspose2d() = default;

    ConvTranspose2d(const Tensor<Scalar>& kernel4, Vector<Scalar> bias_, std::size_t stride_,
                    std::size_t padding_)
        : stride(stride_), padding(padding_), bias(std::move(bias_)) {
        if (kernel4.rank() != 4) throw ShapeError("ConvTranspose2d: kernel must be rank 4 [in,out,kh,kw]");
        in_channels = kernel4.extent(0);
        out_channels = kernel4.extent(1);
        kernel_h = kernel4.extent(2);
        kernel_w = kernel4.extent(3);
        kernel = Eigen::Map<const RowMajorMatrix<Scalar>>(
            kernel4.data(), static_cast<Eigen::Index>(in_channels),
            static_cast<Eigen::Index>(out_channels * kernel_h * kernel_w));
    }

    Tensor<Scalar> kernel_tensor() const {
        Vector<Scalar> flat = Eigen::Map<const Vector<Scalar>>(kernel.data(), kernel.size());
        return Tensor<Scalar>({in_channels, out_channels, kernel_h, kernel_w}, std::move(flat));
    }

    Shape output_shape(const Shape& in) const {
        if (stride < 1) throw ShapeError("ConvTranspose2d: stride must be >= 1");
        if (static_cast<std::size_t>(bias.size()) != out_channels)
            throw ShapeError("ConvTranspose2d: bias length must equal out_channels");
        if (in.size() != 3 || in[0] != in_channels)
            throw ShapeError("ConvTranspose2d: expects input [" + std::to_string(in_channels) +
                             ",H,W], got " + shape_string(in));
        const auto oh = static_cast<long long>((in[1] - 1) * stride + kernel_h) - 2 * static_cast<long long>(padding);
        const auto ow = static_cast<long long>((in[2] - 1) * stride + kernel_w) - 2 * static_cast<long long>(padding);
        if (oh <= 0 || ow <= 0) throw ShapeError("ConvTranspose2d: padding leaves an empty output");
        return {out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
    }

    Vector<Scalar> forward(const Shape& in, const Vector<Scalar>& x) const {
        const Shape out = output_shape(in);
        const auto hw = static_cast<Eigen::Index>(in[1] * in[2]);
        Eigen::Map<const RowMajorMatrix<Scalar>> input(x.data(), static_cast<Eigen::Index>(in_channels), hw);
        const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols = kernel.transpose() * input;

        Vector<Scalar> y(static_cast<Eigen::Index>(shape_numel(out)));
        const std::size_t plane = out[1] * out[2];
        for (std::size_t oc = 0; oc < out_channels; ++oc)
            y.segment(static_cast<Eigen::Index>(oc * plane), static_cast<Eigen::Index>(plane))
                .setConstant(bias[static_cast<Eigen::Index>(oc)]);
        col2im(cols, in, out, y);
        return y;
    }

    Vector<Scalar> backward(const Shape& in, const Vector<Scalar>&, const Vector<Scalar>& upstream) const {
        const Shape out = output_shape(in);
        const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols = im2col(upstream, in, out);
        RowMajorMatrix<Scalar> grad = kernel * cols;
        return Eigen::Map<const Vector<Scalar>>(grad.data(), grad.size());
    }

    template <typename T>
    ConvTranspose2d<T> cast() const {
        ConvTranspose2d<T> c;
        c.in_channels = in_channels;
        c.out_channels = out_channels;
        c.kernel_h = kernel_h;
        c.kernel_w = kernel_w;
        c.stride = stride;
        c.padding = padding;
        c.kernel = kernel.template cast<T>();
        c.bias = bias.template cast<T>();
        return c;
    }

private:
    template <typename F>
    void for_each_tap(const Shape& in, const Shape& out, F&& f) const {
        const auto pad = static_cast<long long>(padding);
        const auto st = static_cast<long long>(stride);
        for (std::size_t oc = 0; oc < out_channels; ++oc)
            for (std::size_t ki = 0; ki < kernel_h; ++ki)
                for (std::size_t kj = 0; kj < kernel_w; ++kj) {
                    const auto r = static_cast<Eigen::Index>((oc * kernel_h + ki) * kernel_w + kj);
                    for (std::size_t ih = 0; ih < in[1]; ++ih) {
                        const long long oh = static_cast<long long>(ih) * st - pad + static_cast<long long>(ki);
                        if (oh < 0 || oh >= static_cast<long long>(out[1])) continue;
                        for (std::size_t iw = 0; iw < in[2]; ++iw) {
                            const long long ow = static_cast<long long>(iw) * st - pad + static_cast<long long>(kj);
                            if (ow < 0 || ow >= static_cast<long long>(out[2])) continue;
                            const auto c = static_cast<Eigen::Index>(ih * in[2] + iw);
                            const auto o = static_cast<Eigen::Index>(
                                (oc * out[1] + static_cast<std::size_t>(oh)) * out[2] + static_cast<std::size_t>(ow));
                            f(r, c, o);
                        }
                    }
                }
    }

    template <typename ColMatrix>
    void col2im(const ColMatrix& cols, const Shape& in, const Shape& out, Vector<Scalar>& y) const {
        for_each_tap(in, out, [&](Eigen::Index r, Eigen::Index c, Eigen::Index o) { y[o] += cols(r, c); });
    }

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> im2col(const Vector<Scalar>& u, const Shape& in,
                                                                 const Shape& out) const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols =
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(
                static_cast<Eigen::Index>(out_channels * kernel_h * kernel_w),
                static_cast<Eigen::Index>(in[1] * in[2]));
        for_each_tap(in, out, [&](Eigen::Index r, Eigen::Index c, Eigen::Index o) { cols(r, c) = u[o]; });
        return cols;
    }
};

/// Batch norm with frozen statistics: a per-channel affine map. Channel is the
/// leading per-sample axis; every element of that slice shares its statistics.
template <typename Scalar>
struct BatchNormInference {
    static constexpr LayerKind kind = LayerKind::BatchNormInference;
    static constexpr bool saves_output = false;

    Vector<Scalar> gamma;
    Vector<Scalar> beta;
    Vector<Scalar> running_mean;
    Vector<Scalar> running_var;
    Scalar epsilon = Scalar(1e-5);

    Shape output_shape(const Shape& in) const {
        const Eigen::Index c = gamma.size();
        if (beta.size() != c || running_mean.size() != c || running_var.size() != c)
            throw ShapeError("BatchNormInference: parameter vectors differ in length");
        if (in.empty() || static_cast<Eigen::Index>(in[0]) != c)
            throw ShapeError("BatchNormInference: expects " + std::to_string(c) + " channels, got " +
                             shape_string(in));
        for (Eigen::Index i = 0; i < c; ++i)
            if (running_var[i] < Scalar(0)) throw NumericalError("BatchNormInference: negative running_var");
        if (!(epsilon >= Scalar(0))) throw NumericalError("BatchNormInference: epsilon must be >= 0");
        for (Eigen::Index i = 0; i < c; ++i)
            if (!(running_var[i] + epsilon > Scalar(0)))
                throw NumericalError("BatchNormInference: running_var + epsilon must be positive");
        return in;
    }

    Vector<Scalar> scale() const {
        return (gamma.array() / (running_var.array() + epsilon).sqrt()).matrix();
    }

    Vector<Scalar> forward(const Shape& in, const Vector<Scalar>& x) const {
        const Vector<Scalar> s = scale();
        const Eigen::Index plane = x.size() / gamma.size();
        Vector<Scalar> y(x.size());
        for (Eigen::Index c = 0; c < gamma.size(); ++c)
            y.segment(c * plane, plane) =
                ((x.segment(c * plane, plane).array() - running_mean[c]) * s[c] + beta[c]).matrix();
        (void)in;
        return y;
    }

    Vector<Scalar> backward(const Shape&, const Vector<Scalar>& x, const Vector<Scalar>& upstream) const {
        const Vector<Scalar> s = scale();
        const Eigen::Index plane = x.size() / gamma.size();
        Vector<Scalar> g(upstream.size());
        for (Eigen::Index c = 0; c < gamma.size(); ++c)
            g.segment(c * plane, plane) = upstream.segment(c * plane, plane) * s[c];
        return g;
    }

    template <typename T>
    BatchNormInference<T> cast() const {
        return {gamma.template cast<T>(), beta.template cast<T>(), running_mean.template cast<T>(),
                running_var.template cast<T>(), static_cast<T>(epsilon)};
    }
};

template <typename Scalar>
struct ReLU {
    static constexpr LayerKind kind = LayerKind::ReLU;
    static constexpr bool saves_output = false;

    Shape output_shape(const Shape& in) const { return in; }
    Vector<Scalar> forward(const Shape&, const Vector<Scalar>& x) const { return x.cwiseMax(Scalar(0)); }
    Vector<Scalar> backward(const Shape&, const Vector<Scalar>& x, const Vector<Scalar>& u) const {
        return (x.array() > Scalar(0)).select(u.array(), Scalar(0)).matrix();
    }
    template <typename T>
    ReLU<T> cast() const { return {}; }
};

template <typename Scalar>
struct LeakyReLU {
    static constexpr LayerKind kind = LayerKind::LeakyReLU;
    static constexpr bool saves_output = false;

    Scalar slope = Scalar(0.2);

    Shape output_shape(const Shape& in) const { return in; }
    Vector<Scalar> forward(const Shape&, const Vector<Scalar>& x) const {
        return (x.array() > Scalar(0)).select(x.array(), x.array() * slope).matrix();
    }
    Vector<Scalar> backward(const Shape&, const Vector<Scalar>& x, const Vector<Scalar>& u) const {
        return (x.array() > Scalar(0)).select(u.array(), u.array() * slope).matrix();
    }
    template <typename T>
    LeakyReLU<T> cast() const { return {static_cast<T>(slope)}; }
};

/// Saves its output: d tanh = 1 - y^2.
template <typename Scalar>
struct Tanh {
    static constexpr LayerKind kind = LayerKind::Tanh;
    static constexpr bool saves_output = true;

    Shape output_shape(const Shape& in) const { return in; }
    Vector<Scalar> forward(const Shape&, const Vector<Scalar>& x) const { return x.array().tanh().matrix(); }
    Vector<Scalar> backward(const Shape&, const Vector<Scalar>& y, const Vector<Scalar>& u) const {
        return (u.array() * (Scalar(1) - y.array().square())).matrix();
    }
    template <typename T>
    Tanh<T> cast() const { return {}; }
};

/// Saves its output: d sigmoid = y (1 - y).
template <typename Scalar>
struct Sigmoid {
    static constexpr LayerKind kind = LayerKind::Sigmoid;
    static constexpr bool saves_output = true;

    Shape output_shape(const Shape& in) const { return in; }
    Vector<Scalar> forward(const Shape&, const Vector<Scalar>& x) const {
        return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
    }
    Vector<Scalar> backward(const Shape&, const Vector<Scalar>& y, const Vector<Scalar>& u) const {
        return (u.array() * y.array() * (Scalar(1) - y.array())).matrix();
    }
    template <typename T>
    Sigmoid<T> cast() const { return {}; }
};

/// Reinterprets the per-sample extents; the flat payload is untouched.
template <typename Scalar>
struct Reshape {
    static constexpr LayerKind kind = LayerKind::Reshape;
    static constexpr bool saves_output = false;

    Shape target;

    Shape output_shape(const Shape& in) const {
        check_shape(target);
        if (shape_numel(target) != shape_numel(in))
            throw ShapeError("Reshape: cannot reshape " + shape_string(in) + " to " + shape_string(target));
        return target;
    }
    Vector<Scalar> forward(const Shape&, const Vector<Scalar>& x) const { return x; }
    Vector<Scalar> backward(const Shape&, const Vector<Scalar>&, const Vector<Scalar>& u) const { return u; }
    template <typename T>
    Reshape<T> cast() const { return {target}; }
};

template <typename Scalar>
using Layer = std::variant<Dense<Scalar>, ConvTranspose2d<Scalar>, BatchNormInference<Scalar>, ReLU<Scalar>,
                           LeakyReLU<Scalar>, Tanh<Scalar>, Sigmoid<Scalar>, Reshape<Scalar>>;

template <typename Scalar>
LayerKind kind_of(const Layer<Scalar>& layer) {
    return std::visit([](const auto& l) { return std::decay_t<decltype(l)>::kind; }, layer);
}

}  // namespace latent_invert
