#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "latent_invert/layers.hpp"
#include "latent_invert/tensor.hpp"

namespace latent_invert {

/// Codomain of the generator's final nonlinearity.
enum class OutputRange {
    UnitInterval,   // Sigmoid, [0, 1]
    SymmetricUnit,  // Tanh, [-1, 1]
};

namespace detail {
inline std::uint64_t next_graph_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

/// Per-sample saved activations: saved[b][k] is what layer k needs for its
/// backward pass (its input, or its output for Sigmoid and Tanh).
template <typename Scalar>
struct ActivationTape {
    std::uint64_t graph_id = 0;
    std::size_t first_layer = 0;
    std::vector<std::vector<Vector<Scalar>>> saved;
};

/// Frozen feed-forward generator mapping a latent vector of length
/// latent_dim to an output of shape output_shape(). Immutable after
/// construction; forward and input_vjp may be called concurrently.
template <typename Scalar>
class GeneratorGraph {
public:
    using scalar_type = Scalar;

    GeneratorGraph(std::size_t latent_dim, std::vector<Layer<Scalar>> layers)
        : latent_dim_(latent_dim), layers_(std::move(layers)), id_(detail::next_graph_id()) {
        if (latent_dim_ == 0) throw ShapeError("generator latent_dim must be positive");
        if (layers_.empty()) throw ShapeError("generator has no layers");
        shapes_.push_back({latent_dim_});
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            try {
                shapes_.push_back(std::visit([&](const auto& l) { return l.output_shape(shapes_.back()); },
                                             layers_[k]));
            } catch (const Error& e) {
                throw ShapeError("layer " + std::to_string(k) + ": " + e.what());
            }
            check_parameters_finite(k);
        }
        range_ = infer_range();
    }

    std::size_t latent_dim() const { return latent_dim_; }
    const std::vector<Layer<Scalar>>& layers() const { return layers_; }
    std::size_t layer_count() const { return layers_.size(); }
    const Shape& input_shape(std::size_t k) const { return shapes_.at(k); }
    const Shape& output_shape(std::size_t k) const { return shapes_.at(k + 1); }
    const Shape& output_shape() const { return shapes_.back(); }
    std::size_t output_size() const { return shape_numel(shapes_.back()); }
    OutputRange output_range() const { return range_; }
    std::uint64_t id() const { return id_; }

    /// Runs layers [first, last) on one sample. When `saved` is non-null it
    /// receives what each layer needs for backward.
    Vector<Scalar> forward_sample(const Vector<Scalar>& input, std::vector<Vector<Scalar>>* saved,
                                  std::size_t first = 0, std::size_t last = npos) const {
        if (last == npos) last = layers_.size();
        if (first > last || last > layers_.size()) throw ShapeError("forward: bad layer range");
        if (static_cast<std::size_t>(input.size()) != shape_numel(shapes_[first]))
            throw ShapeError("forward: input length " + std::to_string(input.size()) + " does not match " +
                             shape_string(shapes_[first]));
        if (saved) saved->clear();
        Vector<Scalar> x = input;
        for (std::size_t k = first; k < last; ++k) {
            std::visit(
                [&](const auto& l) {
                    using L = std::decay_t<decltype(l)>;
                    Vector<Scalar> y = l.forward(shapes_[k], x);
                    if (!all_finite(y))
                        throw NumericalError("non-finite activation at layer " + std::to_string(k) + " (" +
                                             layer_kind_name(L::kind) + ")");
                    if (saved) saved->push_back(L::saves_output ? y : x);
                    x = std::move(y);
                },
                layers_[k]);
        }
        return x;
    }

    /// Pulls `upstream` (gradient w.r.t. the output of layer last-1) back to
    /// the input of layer `first`.
    Vector<Scalar> vjp_sample(const std::vector<Vector<Scalar>>& saved, const Vector<Scalar>& upstream,
                              std::size_t first = 0, std::size_t last = npos) const {
        if (last == npos) last = layers_.size();
        if (saved.size() != last - first) throw ShapeError("vjp: tape does not match layer range");
        if (static_cast<std::size_t>(upstream.size()) != shape_numel(shapes_[last]))
            throw ShapeError("vjp: upstream length does not match layer output");
        Vector<Scalar> g = upstream;
        for (std::size_t k = last; k-- > first;) {
            g = std::visit([&](const auto& l) { return l.backward(shapes_[k], saved[k - first], g); }, layers_[k]);
            if (!all_finite(g))
                throw NumericalError("non-finite gradient at layer " + std::to_string(k));
        }
        return g;
    }

    template <typename T>
    GeneratorGraph<T> cast() const {
        std::vector<Layer<T>> out;
        out.reserve(layers_.size());
        for (const auto& layer : layers_)
            out.push_back(std::visit([](const auto& l) -> Layer<T> { return l.template cast<T>(); }, layer));
        return GeneratorGraph<T>(latent_dim_, std::move(out));
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    OutputRange infer_range() const {
        for (std::size_t k = layers_.size(); k-- > 0;) {
            const LayerKind kind = kind_of(layers_[k]);
            if (kind == LayerKind::Reshape) continue;
            if (kind == LayerKind::Sigmoid) return OutputRange::UnitInterval;
            if (kind == LayerKind::Tanh) return OutputRange::SymmetricUnit;
            break;
        }
        throw ShapeError("generator must end in a Sigmoid or Tanh nonlinearity");
    }

    void check_parameters_finite(std::size_t k) const {
        bool ok = true;
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Dense<Scalar>>) {
                    ok = all_finite(l.weight) && all_finite(l.bias);
                } else if constexpr (std::is_same_v<L, ConvTranspose2d<Scalar>>) {
                    ok = all_finite(l.kernel) && all_finite(l.bias);
                } else if constexpr (std::is_same_v<L, BatchNormInference<Scalar>>) {
                    ok = all_finite(l.gamma) && all_finite(l.beta) && all_finite(l.running_mean) &&
                         all_finite(l.running_var) && std::isfinite(l.epsilon);
                } else if constexpr (std::is_same_v<L, LeakyReLU<Scalar>>) {
                    ok = std::isfinite(l.slope);
                }
            },
            layers_[k]);
        if (!ok) throw NumericalError("layer " + std::to_string(k) + ": non-finite weight");
    }

    std::size_t latent_dim_;
    std::vector<Layer<Scalar>> layers_;
    std::vector<Shape> shapes_;
    OutputRange range_ = OutputRange::UnitInterval;
    std::uint64_t id_;
};

using Generator = GeneratorGraph<float>;

template <typename Scalar>
struct ForwardResult {
    Tensor<Scalar> output;
    ActivationTape<Scalar> tape;
};

/// G(z) for a batch [B, d]. Each row goes through the per-sample path on its
/// own buffer, so a batched result equals the stacked single-sample results
/// bit for bit.
template <typename Scalar>
ForwardResult<Scalar> forward(const GeneratorGraph<Scalar>& g, const Tensor<Scalar>& z_batch) {
    if (z_batch.rank() != 2 || z_batch.extent(1) != g.latent_dim())
        throw ShapeError("forward: expected z of shape [B," + std::to_string(g.latent_dim()) + "], got " +
                         shape_string(z_batch.shape()));
    if (!all_finite(z_batch.values())) throw NumericalError("forward: z contains non-finite values");
    const std::size_t batch = z_batch.extent(0);
    Shape out_shape{batch};
    out_shape.insert(out_shape.end(), g.output_shape().begin(), g.output_shape().end());

    ForwardResult<Scalar> result{Tensor<Scalar>(out_shape), {g.id(), 0, {}}};
    result.tape.saved.resize(batch);
    for (std::size_t b = 0; b < batch; ++b)
        result.output.set_row(b, g.forward_sample(z_batch.row(b), &result.tape.saved[b]));
    return result;
}

/// Vector-Jacobian product back to the latent input: d(sum(upstream * G(z)))/dz.
template <typename Scalar>
Tensor<Scalar> input_vjp(const GeneratorGraph<Scalar>& g, const ActivationTape<Scalar>& tape,
                         const Tensor<Scalar>& upstream) {
    if (tape.graph_id != g.id() || tape.first_layer != 0)
        throw ShapeError("input_vjp: tape was recorded on a different graph");
    const std::size_t batch = tape.saved.size();
    if (upstream.rank() < 1 || upstream.extent(0) != batch || upstream.row_shape() != g.output_shape())
        throw ShapeError("input_vjp: upstream shape " + shape_string(upstream.shape()) +
                         " does not match forward output");
    Tensor<Scalar> grad({batch, g.latent_dim()});
    for (std::size_t b = 0; b < batch; ++b) grad.set_row(b, g.vjp_sample(tape.saved[b], upstream.row(b)));
    return grad;
}

}  // namespace latent_invert
