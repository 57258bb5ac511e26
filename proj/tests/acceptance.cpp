// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "latent_invert/cli.hpp"
#include "latent_invert/inversion.hpp"
#include "latent_invert/model_io.hpp"
#include "test_support.hpp"

using namespace latent_invert;
using namespace latent_invert::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checks = 0;
    std::vector<bool> kinds_seen(8, false);
    for (std::uint64_t graph = 0; graph < 20; ++graph) {
        const bool sigmoid = graph % 2 == 0;
        const Generator g = random_generator(1000 + graph, sigmoid);
        for (const auto& layer : g.layers()) kinds_seen[static_cast<std::size_t>(kind_of(layer))] = true;
        const GeneratorGraph<double> gd = g.cast<double>();

        RngState rng(5000 + graph);
        Vector<float> z;
        do {
            z = randn_vec(rng, g.latent_dim());
        } while (!smooth_around(g, z));
        const Vector<float> target = g.forward_sample(randn_vec(rng, g.latent_dim()), nullptr);
        const Vector<double> target_d = target.cast<double>();

        // BCE needs outputs in [0,1]; Tanh graphs are checked with MSE only
        std::vector<LossKind> losses{LossKind::MSE};
        if (sigmoid) losses.push_back(LossKind::BCE);
        for (LossKind loss : losses)
            for (double beta : {0.0, 0.01}) {
                Objective obj;
                obj.loss = loss;
                obj.beta = beta;
                const auto s = objective_sample(obj, g, z, target);
                const auto numeric = central_differences<double>(z.cast<double>(), [&](const Vector<double>& zz) {
                    return objective_sample(obj, gd, zz, target_d).total;
                });
                worst = std::max(worst, max_relative_error(s.grad_z, numeric));
                ++checks;
            }
    }
    bool all_kinds = true;
    for (bool k : kinds_seen) all_kinds = all_kinds && k;
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && secs < 30.0 && all_kinds,
            std::to_string(checks) + " checks on 20 graphs, max rel err " + fmt("%.3g", worst) + ", all layer kinds " +
                (all_kinds ? "covered" : "NOT covered") + ", " + fmt("%.2f", secs) + " s"};
}

Outcome batch_separability() {
    const Generator g = self_inversion_generator();
    RngState rng(77);
    const TensorF x = forward(g, randn(rng, {8, 8})).output;
    InversionConfig cfg;
    cfg.max_iters = 200;
    cfg.patience = 0;
    cfg.seed = 4242;

    // z of every row after every evaluation
    auto record = [](std::vector<std::vector<Vector<float>>>& traj) {
        return [&traj](const IterationView<float>& v) {
            for (std::size_t b = 0; b < v.z.size(); ++b) traj[b].push_back(v.z[b]);
        };
    };
    std::vector<std::vector<Vector<float>>> joint(8);
    const auto jr = invert<float>(g, x, cfg, record(joint));

    std::size_t mismatches = 0, compared = 0;
    for (std::size_t b = 0; b < 8; ++b) {
        InversionConfig one = cfg;
        one.row_offset = b;
        std::vector<std::vector<Vector<float>>> single(1);
        const auto sr = invert_single<float>(g, TensorF(g.output_shape(), x.row(b)), one, record(single));
        if (single[0].size() != joint[b].size()) {
            ++mismatches;
            continue;
        }
        for (std::size_t t = 0; t < single[0].size(); ++t, ++compared)
            if (std::memcmp(single[0][t].data(), joint[b][t].data(), 8 * sizeof(float)) != 0) ++mismatches;
        if (std::memcmp(sr.recon.data(), jr.recon.row(b).data(), g.output_size() * sizeof(float)) != 0 ||
            sr.per_sample_loss[0] != jr.per_sample_loss[b])
            ++mismatches;
    }
    return {mismatches == 0 && compared == 8 * 200,
            std::to_string(compared) + " per-row iterates compared, " + std::to_string(mismatches) + " mismatches"};
}

Outcome self_inversion() {
    const Generator g = self_inversion_generator();
    RngState rng(20240601);
    const TensorF x = forward(g, randn(rng, {100, 8})).output;
    InversionConfig cfg;
    cfg.restarts = 3;
    cfg.seed = 1;
    const auto t0 = Clock::now();
    const auto r = invert(g, x, cfg);
    const double secs = seconds_since(t0);
    std::size_t good = 0;
    double worst = 0.0;
    for (std::size_t b = 0; b < 100; ++b) {
        if (r.per_sample_mse[b] <= 1e-3f) ++good;
        worst = std::max(worst, static_cast<double>(r.per_sample_mse[b]));
    }
    return {good >= 90 && secs < 120.0, std::to_string(good) + "/100 with MSE <= 1e-3 (worst " + fmt("%.3g", worst) +
                                            ", mean " + fmt("%.3g", mean(r.per_sample_mse)) + "), " +
                                            fmt("%.1f", secs) + " s"};
}

Outcome uniform_clipping() {
    float worst = 0.0f;
    std::size_t iterations = 0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Generator g = seed % 2 ? self_inversion_generator() : random_generator(300 + seed, true);
        RngState rng(seed);
        const TensorF x = forward(g, sample_uniform<float>(rng, {4, g.latent_dim()}, -1.0, 1.0)).output;
        InversionConfig cfg;
        cfg.objective.prior = PriorSpec::uniform(-1.0, 1.0);
        cfg.optimizer.alpha = seed < 3 ? 0.01 : 0.5;
        cfg.max_iters = 300;
        cfg.restarts = 1;
        cfg.seed = seed;
        invert<float>(g, x, cfg, [&](const IterationView<float>& v) {
            ++iterations;
            for (const auto& z : v.z) worst = std::max(worst, z.cwiseAbs().maxCoeff());
        });
    }
    return {worst <= 1.0f, std::to_string(iterations) + " iterations observed, max |z| " + fmt("%.9g", worst)};
}

Outcome regularizer_closed_forms() {
    const double at_zero = gaussian_log_prior(TensorF({1, 8})).logp[0];
    double worst = 0.0;
    RngState rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng.next_index(64);
        const TensorF z = randn(rng, {3, d}, 2.0);
        const auto lp = gaussian_log_prior(z);
        for (std::size_t i = 0; i < z.size(); ++i)
            worst = std::max(worst, std::abs(lp.dlogp_dz[i] - (-static_cast<double>(z[i]) / static_cast<double>(d))));
    }
    return {std::abs(at_zero + 0.918939) <= 1e-5 && worst <= 1e-6,
            "logp(0) = " + fmt("%.7f", at_zero) + ", max gradient deviation " + fmt("%.3g", worst)};
}

Outcome rmsprop_first_step() {
    const RmsPropState<float> state(RmsPropParams{0.01, 0.9, 1e-8}, {1});
    const auto step = rmsprop_step(state, TensorF({1}), TensorF({1}, {1.0f}));
    const double dz = -static_cast<double>(step.z[0]);
    return {std::abs(dz - 0.0316228) <= 1e-6, "dz = " + fmt("%.9f", dz)};
}

/// Byte ranges of the structural header fields of a GANW file, found by
/// walking the layout independently of the decoder.
std::vector<std::pair<std::size_t, std::size_t>> ganw_header_fields(const std::vector<std::uint8_t>& b) {
    auto u32 = [&](std::size_t at) {
        std::uint32_t v;
        std::memcpy(&v, b.data() + at, 4);
        return v;
    };
    std::vector<std::pair<std::size_t, std::size_t>> f{{0, 4}, {4, 4}, {8, 4}, {12, 4}};
    std::size_t at = 16;
    for (std::uint32_t k = 0, n = u32(8); k < n; ++k) {
        const std::uint8_t tag = b[at++];
        if (tag == static_cast<std::uint8_t>(LayerKind::ConvTranspose2d)) at += 8;
        if (tag == static_cast<std::uint8_t>(LayerKind::BatchNormInference)) at += 4;
        if (tag == static_cast<std::uint8_t>(LayerKind::LeakyReLU)) at += 4;
        if (tag == static_cast<std::uint8_t>(LayerKind::Reshape)) {
            const std::uint32_t rank = u32(at);
            f.push_back({at, 4});
            for (std::uint32_t r = 0; r < rank; ++r) f.push_back({at + 4 + 4 * r, 4});
            at += 4 + 4 * rank;
        }
        const std::uint32_t tensors = u32(at);
        f.push_back({at, 4});
        at += 4;
        for (std::uint32_t t = 0; t < tensors; ++t) {
            const std::uint32_t rank = u32(at);
            f.push_back({at, 4});
            for (std::uint32_t r = 0; r < rank; ++r) f.push_back({at + 4 + 8 * r, 8});
            at += 4 + 8 * rank;
        }
    }
    return f;
}

Outcome format_robustness() {
    bool identity = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Generator g = random_generator(seed, seed % 2 == 0);
        const auto bytes = encode_generator(g);
        const Generator back = decode_generator(bytes);
        RngState rng(seed);
        const TensorF z = randn(rng, {2, g.latent_dim()});
        const TensorF a = forward(g, z).output, c = forward(back, z).output;
        identity = identity && encode_generator(back) == bytes &&
                   std::memcmp(a.data(), c.data(), a.size() * sizeof(float)) == 0;
    }

    const auto good = encode_generator(random_generator(123, true));
    const auto fields = ganw_header_fields(good);
    RngState rng(31337);
    std::size_t rejected = 0, accepted = 0, other = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto bytes = good;
        const auto [start, len] = fields[rng.next_index(fields.size())];
        const std::size_t at = start + rng.next_index(len);
        const auto original = bytes[at];
        while (bytes[at] == original) bytes[at] = static_cast<std::uint8_t>(rng.next_u64());
        try {
            decode_generator(bytes);
            ++accepted;
        } catch (const Error&) {
            ++rejected;
        } catch (...) {
            ++other;
        }
    }
    return {identity && rejected == 100, std::string("round trip ") + (identity ? "bit-exact" : "BROKEN") + "; " +
                                             std::to_string(rejected) + "/100 header mutations rejected, " +
                                             std::to_string(accepted) + " accepted, " + std::to_string(other) +
                                             " unstructured"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome invert_determinism() {
    const fs::path root = fs::temp_directory_path() / "latent_invert_acceptance";
    fs::remove_all(root);
    fs::create_directories(root / "images");
    const Generator g = self_inversion_generator();
    save_generator(g, root / "model.ganw");
    RngState rng(5);
    const TensorF x = forward(g, randn(rng, {4, 8})).output;
    for (std::size_t b = 0; b < 4; ++b)
        write_image(TensorF(g.output_shape(), x.row(b)), root / "images" / ("t" + std::to_string(b) + ".pgm"));

    bool ok = true;
    for (const char* run : {"run1", "run2"}) {
        std::ostringstream out, err;
        ok = ok && run_cli({"invert", "--model", (root / "model.ganw").string(), "--images",
                            (root / "images").string(), "--out", (root / run).string(), "--seed", "7"},
                           out, err) == 0;
    }
    std::size_t identical = 0;
    for (const char* f : {"z.tnsr", "recon_grid.pgm", "losses.csv"})
        if (fs::exists(root / "run1" / f) && slurp(root / "run1" / f) == slurp(root / "run2" / f)) ++identical;
    fs::remove_all(root);
    return {ok && identical == 3, std::to_string(identical) + "/3 output files byte-identical across two runs"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"batch separability", batch_separability},
        {"self-inversion recovery", self_inversion},
        {"uniform-prior clipping", uniform_clipping},
        {"regularizer closed forms", regularizer_closed_forms},
        {"rmsprop first step", rmsprop_first_step},
        {"format robustness", format_robustness},
        {"invert determinism", invert_determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
