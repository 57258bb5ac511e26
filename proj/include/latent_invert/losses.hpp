#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "latent_invert/generator.hpp"
#include "latent_invert/prior.hpp"
#include "latent_invert/tensor.hpp"

namespace latent_invert {

enum class LossKind { BCE, MSE };

inline const char* loss_name(LossKind kind) { return kind == LossKind::BCE ? "bce" : "mse"; }

inline LossKind parse_loss(const std::string& name) {
    if (name == "bce") return LossKind::BCE;
    if (name == "mse") return LossKind::MSE;
    throw Error("unknown loss '" + name + "' (expected bce or mse)");
}

/// Predictions are clamped to [eps, 1 - eps] before the logs.
inline constexpr double kBceClamp = 1e-6;

/// 0.5 * log(2 pi)
inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;

/// Reconstruction loss plus -beta * log P(z). The regularizer is only defined
/// for a Gaussian prior; a Uniform prior has constant density on its support
/// and is enforced by clipping instead.
struct Objective {
    LossKind loss = LossKind::BCE;
    double beta = 0.01;
    PriorSpec prior = PriorSpec::gaussian();

    void validate() const {
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw NumericalError("beta must be a finite value >= 0");
        prior.validate();
    }

    double effective_beta() const { return prior.is_gaussian() ? beta : 0.0; }
};

template <typename Scalar>
struct LossAndGrad {
    double loss = 0.0;
    Vector<Scalar> grad;
};

/// Mean BCE over all elements and its gradient w.r.t. the prediction.
template <typename Scalar>
LossAndGrad<Scalar> bce_value_and_grad(const Vector<Scalar>& target, const Vector<Scalar>& pred) {
    if (target.size() != pred.size()) throw ShapeError("bce: shape mismatch");
    const auto n = static_cast<double>(target.size());
    LossAndGrad<Scalar> out{0.0, Vector<Scalar>(pred.size())};
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double x = target[i];
        if (!(x >= 0.0 && x <= 1.0)) throw NumericalError("bce: target outside [0,1]");
        const double y = std::clamp(static_cast<double>(pred[i]), kBceClamp, 1.0 - kBceClamp);
        out.loss -= x * std::log(y) + (1.0 - x) * std::log(1.0 - y);
        out.grad[i] = static_cast<Scalar>((-x / y + (1.0 - x) / (1.0 - y)) / n);
    }
    out.loss /= n;
    return out;
}

/// Mean squared error over all elements and its gradient w.r.t. the prediction.
template <typename Scalar>
LossAndGrad<Scalar> mse_value_and_grad(const Vector<Scalar>& target, const Vector<Scalar>& pred) {
    if (target.size() != pred.size()) throw ShapeError("mse: shape mismatch");
    const auto n = static_cast<double>(target.size());
    LossAndGrad<Scalar> out{0.0, Vector<Scalar>(pred.size())};
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double r = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
        out.loss += r * r;
        out.grad[i] = static_cast<Scalar>(2.0 * r / n);
    }
    out.loss /= n;
    return out;
}

template <typename Scalar>
std::pair<double, Tensor<Scalar>> bce_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
    if (x.shape() != y.shape()) throw ShapeError("bce: shape mismatch");
    auto r = bce_value_and_grad<Scalar>(x.values(), y.values());
    return {r.loss, Tensor<Scalar>(y.shape(), std::move(r.grad))};
}

template <typename Scalar>
std::pair<double, Tensor<Scalar>> mse_loss(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
    if (x.shape() != y.shape()) throw ShapeError("mse: shape mismatch");
    auto r = mse_value_and_grad<Scalar>(x.values(), y.values());
    return {r.loss, Tensor<Scalar>(y.shape(), std::move(r.grad))};
}

/// Per-coordinate average standard-normal log density of one latent vector,
/// (1/d) sum_i log N(z_i; 0, 1), with gradient -z_i / d.
template <typename Scalar>
LossAndGrad<Scalar> standard_normal_log_prior(const Vector<Scalar>& z) {
    const auto d = static_cast<double>(z.size());
    LossAndGrad<Scalar> out{0.0, Vector<Scalar>(z.size())};
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double v = z[i];
        out.loss += -0.5 * v * v - kHalfLogTwoPi;
        out.grad[i] = static_cast<Scalar>(-v / d);
    }
    out.loss /= d;
    return out;
}

template <typename Scalar>
struct LogPrior {
    Tensor<Scalar> logp;      // [B]
    Tensor<Scalar> dlogp_dz;  // [B, d]
};

template <typename Scalar>
LogPrior<Scalar> gaussian_log_prior(const Tensor<Scalar>& z) {
    if (z.rank() != 2) throw ShapeError("gaussian_log_prior: expected [B,d]");
    LogPrior<Scalar> out{Tensor<Scalar>({z.extent(0)}), Tensor<Scalar>(z.shape())};
    for (std::size_t b = 0; b < z.extent(0); ++b) {
        const auto r = standard_normal_log_prior<Scalar>(z.row(b));
        if (!std::isfinite(r.loss)) throw NumericalError("gaussian_log_prior: non-finite value");
        out.logp[b] = static_cast<Scalar>(r.loss);
        out.dlogp_dz.set_row(b, r.grad);
    }
    return out;
}

/// Log prior of one latent under `prior`, evaluated in standardized
/// coordinates u = (z - mean) / std. Zero for a Uniform prior.
template <typename Scalar>
LossAndGrad<Scalar> log_prior(const PriorSpec& prior, const Vector<Scalar>& z) {
    if (!prior.is_gaussian()) return {0.0, Vector<Scalar>::Zero(z.size())};
    const Vector<Scalar> u = ((z.array() - static_cast<Scalar>(prior.mean)) / static_cast<Scalar>(prior.stddev)).matrix();
    auto r = standard_normal_log_prior<Scalar>(u);
    r.grad /= static_cast<Scalar>(prior.stddev);
    return r;
}

template <typename Scalar>
struct SampleObjective {
    double total = 0.0;
    double recon_loss = 0.0;
    double log_prior = 0.0;
    Vector<Scalar> grad_z;
    Vector<Scalar> recon;
};

/// Objective for one latent/target pair; `target` lives in the generator's
/// output space.
template <typename Scalar>
SampleObjective<Scalar> objective_sample(const Objective& obj, const GeneratorGraph<Scalar>& g,
                                         const Vector<Scalar>& z, const Vector<Scalar>& target) {
    if (obj.loss == LossKind::BCE && g.output_range() != OutputRange::UnitInterval)
        throw Error("bce loss requires a Sigmoid-output generator; use mse for Tanh outputs");
    std::vector<Vector<Scalar>> saved;
    SampleObjective<Scalar> out;
    out.recon = g.forward_sample(z, &saved);
    const auto rl = obj.loss == LossKind::BCE ? bce_value_and_grad<Scalar>(target, out.recon)
                                              : mse_value_and_grad<Scalar>(target, out.recon);
    out.recon_loss = rl.loss;
    out.grad_z = g.vjp_sample(saved, rl.grad);

    const double beta = obj.effective_beta();
    if (beta > 0.0) {
        const auto lp = log_prior<Scalar>(obj.prior, z);
        out.log_prior = lp.loss;
        out.grad_z -= static_cast<Scalar>(beta) * lp.grad;
    } else if (obj.prior.is_gaussian()) {
        out.log_prior = log_prior<Scalar>(obj.prior, z).loss;
    }
    out.total = out.recon_loss - beta * out.log_prior;
    if (!std::isfinite(out.total)) throw NumericalError("objective is non-finite");
    return out;
}

template <typename Scalar>
struct ObjectiveEval {
    Tensor<Scalar> total;   // [B]
    Tensor<Scalar> grad_z;  // [B, d]
    Tensor<Scalar> recon;   // [B, ...output]
};

template <typename Scalar>
ObjectiveEval<Scalar> objective_value_and_grad(const Objective& obj, const GeneratorGraph<Scalar>& g,
                                               const Tensor<Scalar>& z, const Tensor<Scalar>& x) {
    obj.validate();
    if (z.rank() != 2 || z.extent(1) != g.latent_dim()) throw ShapeError("objective: z must be [B,d]");
    if (x.rank() < 1 || x.extent(0) != z.extent(0) || x.row_shape() != g.output_shape())
        throw ShapeError("objective: target shape " + shape_string(x.shape()) + " does not match generator");
    const std::size_t batch = z.extent(0);
    Shape recon_shape{batch};
    recon_shape.insert(recon_shape.end(), g.output_shape().begin(), g.output_shape().end());
    ObjectiveEval<Scalar> out{Tensor<Scalar>({batch}), Tensor<Scalar>(z.shape()), Tensor<Scalar>(recon_shape)};
    for (std::size_t b = 0; b < batch; ++b) {
        const auto s = objective_sample(obj, g, z.row(b), x.row(b));
        out.total[b] = static_cast<Scalar>(s.total);
        out.grad_z.set_row(b, s.grad_z);
        out.recon.set_row(b, s.recon);
    }
    return out;
}

}  // namespace latent_invert
