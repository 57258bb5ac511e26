#pragma once

#include <cstdint>
#include <string>

#include "latent_invert/error.hpp"
#include "latent_invert/rng.hpp"
#include "latent_invert/tensor.hpp"

namespace latent_invert {

/// Latent prior P(Z): i.i.d. Gaussian(mean, std) or Uniform[a, b] per coordinate.
struct PriorSpec {
    enum class Kind { Gaussian, Uniform };

    Kind kind = Kind::Gaussian;
    double mean = 0.0;
    double stddev = 1.0;
    double low = -1.0;
    double high = 1.0;

    static PriorSpec gaussian(double mean = 0.0, double stddev = 1.0) {
        PriorSpec p;
        p.kind = Kind::Gaussian;
        p.mean = mean;
        p.stddev = stddev;
        return p;
    }

    static PriorSpec uniform(double low = -1.0, double high = 1.0) {
        PriorSpec p;
        p.kind = Kind::Uniform;
        p.low = low;
        p.high = high;
        return p;
    }

    bool is_gaussian() const { return kind == Kind::Gaussian; }
    bool is_uniform() const { return kind == Kind::Uniform; }

    void validate() const {
        if (is_gaussian() && !(stddev > 0.0)) throw NumericalError("Gaussian prior needs std > 0");
        if (is_uniform() && !(low < high)) throw NumericalError("Uniform prior needs a < b");
    }

    std::string describe() const {
        return is_gaussian() ? "gaussian(" + std::to_string(mean) + "," + std::to_string(stddev) + ")"
                             : "uniform(" + std::to_string(low) + "," + std::to_string(high) + ")";
    }

    template <typename Scalar = float>
    Tensor<Scalar> sample(RngState& rng, const Shape& shape) const {
        validate();
        return is_gaussian() ? sample_gaussian<Scalar>(rng, shape, mean, stddev)
                             : sample_uniform<Scalar>(rng, shape, low, high);
    }
};

}  // namespace latent_invert
