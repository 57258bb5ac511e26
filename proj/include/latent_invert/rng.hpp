#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "latent_invert/tensor.hpp"

namespace latent_invert {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed for sub-stream `index` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return seed ^ mix64(index + 0x632BE59BD9B4E019ull);
}

/// Counter-based SplitMix64 stream: the n-th word is mix64(seed + n * 0x9E3779B97F4A7C15).
/// Uniforms take the top 53 bits; Gaussians use Box-Muller on consecutive
/// uniform pairs, consuming both outputs in order.
class RngState {
public:
    explicit RngState(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ull);
    }

    /// Uniform on [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_unit();  // (0, 1]
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform index in [0, n).
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(next_unit() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

template <typename Scalar = float>
Tensor<Scalar> sample_gaussian(RngState& rng, const Shape& shape, double mean, double stddev) {
    if (!(stddev > 0.0) || !std::isfinite(stddev))
        throw NumericalError("sample_gaussian: std must be positive");
    if (!std::isfinite(mean)) throw NumericalError("sample_gaussian: mean must be finite");
    Tensor<Scalar> out(shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<Scalar>(mean + stddev * rng.next_gaussian());
    return out;
}

template <typename Scalar = float>
Tensor<Scalar> sample_uniform(RngState& rng, const Shape& shape, double a, double b) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw NumericalError("sample_uniform: requires a < b");
    Tensor<Scalar> out(shape);
    const auto hi = static_cast<Scalar>(b);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto v = static_cast<Scalar>(a + (b - a) * rng.next_unit());
        // rounding to Scalar can land on b itself
        if (v >= hi) v = std::nextafter(hi, static_cast<Scalar>(a));
        out[i] = v;
    }
    return out;
}

}  // namespace latent_invert
