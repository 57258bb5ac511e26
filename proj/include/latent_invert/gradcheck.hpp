#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "latent_invert/generator.hpp"
#include "latent_invert/losses.hpp"
#include "latent_invert/rng.hpp"

namespace latent_invert {

/// Worst coordinate of one finite-difference comparison.
struct GradcheckEntry {
    std::size_t layer = 0;  // input of this layer was perturbed; layer_count() means the latent
    const char* kind = "latent";
    std::size_t coords_checked = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    /// max_i |analytic_i - numeric_i| / max(max_i |numeric_i|, 1e-12)
    double rel_err = 0.0;
};

struct GradcheckReport {
    GradcheckEntry latent;               // full objective w.r.t. z
    std::vector<GradcheckEntry> layers;  // reconstruction loss w.r.t. each layer input
};

template <typename Scalar, typename F>
GradcheckEntry compare_with_central_differences(const Vector<double>& point, const Vector<Scalar>& analytic,
                                                const std::vector<std::size_t>& coords, double step, F&& f) {
    GradcheckEntry e;
    e.coords_checked = coords.size();
    double worst_abs = -1.0;
    double scale = 0.0;
    for (std::size_t i : coords) {
        Vector<double> plus = point, minus = point;
        plus[static_cast<Eigen::Index>(i)] += step;
        minus[static_cast<Eigen::Index>(i)] -= step;
        const double h = plus[static_cast<Eigen::Index>(i)] - minus[static_cast<Eigen::Index>(i)];
        const double numeric = (f(plus) - f(minus)) / h;
        const double a = analytic[static_cast<Eigen::Index>(i)];
        scale = std::max(scale, std::abs(numeric));
        if (std::abs(a - numeric) > worst_abs) {
            worst_abs = std::abs(a - numeric);
            e.worst_index = i;
            e.analytic = a;
            e.numeric = numeric;
        }
    }
    e.rel_err = worst_abs / std::max(scale, 1e-12);
    return e;
}

/// Checks the analytic latent gradient of `obj` (and the backward pass of
/// every layer) against central differences at a random prior sample, with a
/// target manufactured from a second prior sample. At most
/// `max_coords_per_layer` coordinates of each layer input are probed.
/// Differences are taken on a double-precision copy of the graph.
template <typename Scalar>
GradcheckReport gradcheck(const GeneratorGraph<Scalar>& g, const Objective& obj, std::uint64_t seed,
                          double step = 1e-3, std::size_t max_coords_per_layer = 64) {
    obj.validate();
    RngState rng(seed);
    const Shape latent_shape{g.latent_dim()};
    const Vector<Scalar> z = obj.prior.template sample<Scalar>(rng, latent_shape).values();
    const Vector<Scalar> target =
        g.forward_sample(obj.prior.template sample<Scalar>(rng, latent_shape).values(), nullptr);

    const GeneratorGraph<double> gd = g.template cast<double>();
    const Vector<double> zd = z.template cast<double>();
    const Vector<double> target_d = target.template cast<double>();

    GradcheckReport report;
    {
        const auto s = objective_sample(obj, g, z, target);
        std::vector<std::size_t> coords(g.latent_dim());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        report.latent = compare_with_central_differences<Scalar>(
            zd, s.grad_z, coords, step,
            [&](const Vector<double>& zz) { return objective_sample(obj, gd, zz, target_d).total; });
        report.latent.layer = g.layer_count();
    }

    const std::size_t last = g.layer_count();
    auto recon_loss = [&](const Vector<Scalar>& y) {
        return obj.loss == LossKind::BCE ? bce_value_and_grad<Scalar>(target, y) : mse_value_and_grad<Scalar>(target, y);
    };
    auto recon_loss_d = [&](const Vector<double>& y) {
        return obj.loss == LossKind::BCE ? bce_value_and_grad<double>(target_d, y).loss
                                         : mse_value_and_grad<double>(target_d, y).loss;
    };
    for (std::size_t k = 0; k < last; ++k) {
        const Vector<Scalar> input = k == 0 ? z : g.forward_sample(z, nullptr, 0, k);
        std::vector<Vector<Scalar>> suffix_saved;
        const Vector<Scalar> y = g.forward_sample(input, &suffix_saved, k, last);
        const Vector<Scalar> analytic = g.vjp_sample(suffix_saved, recon_loss(y).grad, k, last);

        std::vector<std::size_t> coords;
        const std::size_t n = static_cast<std::size_t>(input.size());
        if (n <= max_coords_per_layer) {
            for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (std::size_t i = 0; i < max_coords_per_layer; ++i) coords.push_back(rng.next_index(n));
        }
        GradcheckEntry e = compare_with_central_differences<Scalar>(
            input.template cast<double>(), analytic, coords, step,
            [&](const Vector<double>& a) { return recon_loss_d(gd.forward_sample(a, nullptr, k, last)); });
        e.layer = k;
        e.kind = layer_kind_name(kind_of(g.layers()[k]));
        report.layers.push_back(e);
    }
    return report;
}

}  // namespace latent_invert
