#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "latent_invert/generator.hpp"
#include "latent_invert/losses.hpp"
#include "latent_invert/optimizer.hpp"
#include "latent_invert/prior.hpp"
#include "latent_invert/rng.hpp"

namespace latent_invert {

struct InversionConfig {
    Objective objective;
    RmsPropParams optimizer;
    /// Upper bound on objective evaluations per run; updates happen between
    /// evaluations, so a run applies at most max_iters - 1 updates.
    std::size_t max_iters = 10000;
    /// Stop once the mean loss improved by less than rel_tol (relative) over
    /// the last `patience` evaluations. patience == 0 disables the check.
    double rel_tol = 1e-5;
    std::size_t patience = 50;
    std::uint64_t seed = 0;
    /// Extra runs from fresh prior samples; each sample keeps its best run.
    std::size_t restarts = 0;
    /// Print the mean loss to std::clog every log_every evaluations (0 = quiet).
    std::size_t log_every = 0;
    /// Global index of row 0, used only for per-row seed derivation. Lets a
    /// sub-batch reproduce the rows of a larger batch exactly.
    std::size_t row_offset = 0;

    void validate() const {
        objective.validate();
        optimizer.validate();
        if (max_iters < 1) throw Error("max_iters must be >= 1");
        if (!(rel_tol >= 0.0)) throw Error("rel_tol must be >= 0");
    }
};

/// Seed of the initial latent for global row `row` in restart `run`.
constexpr std::uint64_t row_seed(std::uint64_t seed, std::size_t row, std::size_t run) {
    return derive_seed(derive_seed(seed, row), run);
}

struct TrajectoryPoint {
    std::size_t run = 0;
    std::size_t iter = 0;
    double mean_loss = 0.0;
};

template <typename Scalar>
struct InversionResult {
    Tensor<Scalar> z_star;           // [B, d]
    Tensor<Scalar> recon;            // G(z_star), generator output space
    Tensor<Scalar> per_sample_loss;  // [B], objective at z_star
    Tensor<Scalar> per_sample_mse;   // [B], in [0,1] image space
    std::size_t iters_used = 0;      // updates applied, summed over runs
    std::vector<TrajectoryPoint> loss_trajectory;
};

/// State handed to an observer after every objective evaluation.
template <typename Scalar>
struct IterationView {
    std::size_t run;
    std::size_t iter;
    double mean_loss;
    const std::vector<Vector<Scalar>>& z;
};

template <typename Scalar>
using InversionObserver = std::function<void(const IterationView<Scalar>&)>;

/// Thrown when the objective turns non-finite; carries the trajectory so far.
class InversionAborted : public NumericalError {
public:
    InversionAborted(const std::string& what, std::vector<TrajectoryPoint> trajectory)
        : NumericalError(what), trajectory_(std::move(trajectory)) {}
    const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }

private:
    std::vector<TrajectoryPoint> trajectory_;
};

/// Maps a [0,1] image into the generator's output space.
template <typename Scalar>
Vector<Scalar> to_generator_space(OutputRange range, const Vector<Scalar>& image) {
    if (range == OutputRange::UnitInterval) return image;
    return (image.array() * Scalar(2) - Scalar(1)).matrix();
}

/// Maps generator output back to [0,1] image space.
template <typename Scalar>
Vector<Scalar> to_image_space(OutputRange range, const Vector<Scalar>& output) {
    if (range == OutputRange::UnitInterval) return output;
    return ((output.array() + Scalar(1)) * Scalar(0.5)).matrix();
}

template <typename Scalar>
Tensor<Scalar> to_image_space(OutputRange range, const Tensor<Scalar>& output) {
    return Tensor<Scalar>(output.shape(), to_image_space<Scalar>(range, output.values()));
}

/// Mean squared error in double between two equally sized vectors.
template <typename Scalar>
double mse(const Vector<Scalar>& a, const Vector<Scalar>& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double r = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += r * r;
    }
    return acc / static_cast<double>(a.size());
}

namespace detail {

template <typename Scalar>
struct RunOutcome {
    std::vector<Vector<Scalar>> z;
    std::vector<SampleObjective<Scalar>> final_eval;
    std::size_t updates = 0;
};

template <typename Scalar>
RunOutcome<Scalar> run_inversion(const GeneratorGraph<Scalar>& g, const std::vector<Vector<Scalar>>& targets,
                                 const InversionConfig& cfg, std::size_t run,
                                 std::vector<TrajectoryPoint>& trajectory,
                                 const InversionObserver<Scalar>& observer) {
    const std::size_t batch = targets.size();
    const PriorSpec& prior = cfg.objective.prior;
    const bool clip = prior.is_uniform();
    const auto lo = static_cast<Scalar>(prior.low);
    const auto hi = static_cast<Scalar>(prior.high);

    RunOutcome<Scalar> out;
    out.z.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        RngState rng(row_seed(cfg.seed, cfg.row_offset + b, run));
        out.z.push_back(prior.template sample<Scalar>(rng, {g.latent_dim()}).values());
    }
    std::vector<Vector<Scalar>> v(batch, Vector<Scalar>::Zero(static_cast<Eigen::Index>(g.latent_dim())));
    out.final_eval.resize(batch);
    std::vector<double> history;

    for (std::size_t t = 0; t < cfg.max_iters; ++t) {
        double total = 0.0;
        try {
            for (std::size_t b = 0; b < batch; ++b) {
                out.final_eval[b] = objective_sample(cfg.objective, g, out.z[b], targets[b]);
                total += out.final_eval[b].total;
            }
        } catch (const NumericalError& e) {
            throw InversionAborted(std::string("inversion aborted at run ") + std::to_string(run) + " iteration " +
                                       std::to_string(t) + ": " + e.what(),
                                   trajectory);
        }
        const double mean_loss = total / static_cast<double>(batch);
        history.push_back(mean_loss);
        trajectory.push_back({run, t, mean_loss});
        if (cfg.log_every && t % cfg.log_every == 0)
            std::clog << "run " << run << " iter " << t << " mean loss " << mean_loss << '\n';
        if (observer) observer(IterationView<Scalar>{run, t, mean_loss, out.z});

        if (t + 1 == cfg.max_iters) break;
        if (cfg.patience > 0 && t >= cfg.patience) {
            const double prev = history[t - cfg.patience];
            if ((prev - mean_loss) / std::max(prev, 1e-12) < cfg.rel_tol) break;
        }

        for (std::size_t b = 0; b < batch; ++b) {
            rmsprop_update<Scalar>(cfg.optimizer, out.z[b], v[b], out.final_eval[b].grad_z);
            if (clip) out.z[b] = out.z[b].cwiseMax(lo).cwiseMin(hi);
        }
        ++out.updates;
    }
    return out;
}

}  // namespace detail

/// Recovers latent codes for a batch of [0,1] images by gradient descent on
/// z alone: sample z from the prior, then alternate objective evaluation and
/// RMSprop updates (clipping into [a,b] under a Uniform prior) until the
/// convergence rule fires. Rows never interact: each row's trajectory is the
/// one it would follow if inverted alone with the same row seed.
template <typename Scalar>
InversionResult<Scalar> invert(const GeneratorGraph<Scalar>& g, const Tensor<Scalar>& x_batch,
                               const InversionConfig& cfg, const InversionObserver<Scalar>& observer = {}) {
    cfg.validate();
    if (x_batch.rank() < 1 || x_batch.row_shape() != g.output_shape())
        throw ShapeError("invert: targets " + shape_string(x_batch.shape()) + " do not match generator output " +
                         shape_string(g.output_shape()));
    for (std::size_t i = 0; i < x_batch.size(); ++i)
        if (!(x_batch[i] >= Scalar(0) && x_batch[i] <= Scalar(1)))
            throw NumericalError("invert: target out of range [0,1] at element " + std::to_string(i));
    if (cfg.objective.loss == LossKind::BCE && g.output_range() != OutputRange::UnitInterval)
        throw Error("bce loss requires a Sigmoid-output generator; use mse for Tanh outputs");

    const std::size_t batch = x_batch.extent(0);
    std::vector<Vector<Scalar>> targets;
    targets.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b)
        targets.push_back(to_generator_space<Scalar>(g.output_range(), x_batch.row(b)));

    InversionResult<Scalar> result;
    auto best = detail::run_inversion(g, targets, cfg, 0, result.loss_trajectory, observer);
    result.iters_used = best.updates;
    for (std::size_t run = 1; run <= cfg.restarts; ++run) {
        auto next = detail::run_inversion(g, targets, cfg, run, result.loss_trajectory, observer);
        result.iters_used += next.updates;
        for (std::size_t b = 0; b < batch; ++b)
            if (next.final_eval[b].total < best.final_eval[b].total) {
                best.z[b] = std::move(next.z[b]);
                best.final_eval[b] = std::move(next.final_eval[b]);
            }
    }

    Shape recon_shape = x_batch.shape();
    result.z_star = Tensor<Scalar>({batch, g.latent_dim()});
    result.recon = Tensor<Scalar>(recon_shape);
    result.per_sample_loss = Tensor<Scalar>({batch});
    result.per_sample_mse = Tensor<Scalar>({batch});
    for (std::size_t b = 0; b < batch; ++b) {
        const auto& e = best.final_eval[b];
        result.z_star.set_row(b, best.z[b]);
        result.recon.set_row(b, e.recon);
        result.per_sample_loss[b] = static_cast<Scalar>(e.total);
        result.per_sample_mse[b] =
            static_cast<Scalar>(mse<Scalar>(to_image_space<Scalar>(g.output_range(), e.recon), x_batch.row(b)));
    }
    return result;
}

/// Single-image inversion; `x` has the generator's output shape.
template <typename Scalar>
InversionResult<Scalar> invert_single(const GeneratorGraph<Scalar>& g, const Tensor<Scalar>& x,
                                      const InversionConfig& cfg, const InversionObserver<Scalar>& observer = {}) {
    return invert(g, Tensor<Scalar>::stack({x}), cfg, observer);
}

}  // namespace latent_invert
