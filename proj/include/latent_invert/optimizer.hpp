#pragma once

#include <cmath>

#include "latent_invert/tensor.hpp"

namespace latent_invert {

struct RmsPropParams {
    double alpha = 0.01;  // learning rate
    double rho = 0.9;     // decay of the squared-gradient average
    double epsilon = 1e-8;

    void validate() const {
        if (!(alpha > 0.0)) throw NumericalError("rmsprop: learning rate must be > 0");
        if (!(rho > 0.0 && rho < 1.0)) throw NumericalError("rmsprop: rho must lie in (0,1)");
        if (!(epsilon > 0.0)) throw NumericalError("rmsprop: epsilon must be > 0");
    }
};

/// v <- rho v + (1 - rho) g^2;  z <- z - alpha g / (sqrt(v) + eps).
/// Purely elementwise, so any row partition of a batch gives the same bits.
template <typename Scalar, typename ZDerived, typename VDerived, typename GDerived>
void rmsprop_update(const RmsPropParams& p, Eigen::MatrixBase<ZDerived>& z, Eigen::MatrixBase<VDerived>& v,
                    const Eigen::MatrixBase<GDerived>& grad) {
    const auto rho = static_cast<Scalar>(p.rho);
    const auto alpha = static_cast<Scalar>(p.alpha);
    const auto eps = static_cast<Scalar>(p.epsilon);
    v.derived().array() = rho * v.derived().array() + (Scalar(1) - rho) * grad.derived().array().square();
    z.derived().array() -= alpha * grad.derived().array() / (v.derived().array().sqrt() + eps);
}

template <typename Scalar>
struct RmsPropState {
    RmsPropParams params;
    Tensor<Scalar> v;  // running mean of squared gradients, starts at zero

    RmsPropState(RmsPropParams p, const Shape& shape) : params(p), v(shape) { params.validate(); }
};

template <typename Scalar>
struct RmsPropStep {
    Tensor<Scalar> z;
    RmsPropState<Scalar> state;
};

template <typename Scalar>
RmsPropStep<Scalar> rmsprop_step(const RmsPropState<Scalar>& state, const Tensor<Scalar>& z,
                                 const Tensor<Scalar>& grad) {
    if (z.shape() != state.v.shape() || grad.shape() != z.shape())
        throw ShapeError("rmsprop_step: shape mismatch");
    if (!all_finite(grad.values())) throw NumericalError("rmsprop_step: non-finite gradient");
    RmsPropStep<Scalar> out{z, state};
    rmsprop_update<Scalar>(state.params, out.z.values(), out.state.v.values(), grad.values());
    if (!all_finite(out.z.values())) throw NumericalError("rmsprop_step: non-finite update");
    return out;
}

/// Plain gradient step z - alpha * grad.
template <typename Scalar>
Tensor<Scalar> sgd_step(const Tensor<Scalar>& z, const Tensor<Scalar>& grad, double alpha) {
    if (z.shape() != grad.shape()) throw ShapeError("sgd_step: shape mismatch");
    if (!all_finite(grad.values())) throw NumericalError("sgd_step: non-finite gradient");
    Vector<Scalar> out = z.values() - static_cast<Scalar>(alpha) * grad.values();
    return Tensor<Scalar>(z.shape(), std::move(out));
}

}  // namespace latent_invert
