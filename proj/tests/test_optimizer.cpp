#include <gtest/gtest.h>

#include <cmath>

#include "latent_invert/optimizer.hpp"
#include "test_support.hpp"

using namespace latent_invert;
using namespace latent_invert::testing;

TEST(RmsProp, ZeroGradientIsANoOp) {
    const RmsPropState<float> state(RmsPropParams{}, {2, 3});
    RngState rng(1);
    const TensorF z = randn(rng, {2, 3});
    const auto step = rmsprop_step(state, z, TensorF({2, 3}));
    EXPECT_EQ(step.z, z);
    EXPECT_EQ(step.state.v, TensorF({2, 3}));
}

TEST(RmsProp, FirstStepSize) {
    // v = 0.1 g^2, so the first step is alpha / sqrt(0.1) for any g != 0
    const RmsPropState<double> state(RmsPropParams{}, {3});
    const auto step = rmsprop_step(state, TensorD({3}), TensorD({3}, {1.0, -4.0, 0.25}));
    EXPECT_NEAR(step.z[0], -0.0316228, 1e-6);
    EXPECT_NEAR(step.z[1], 0.0316228, 1e-6);
    EXPECT_NEAR(step.z[2], -0.0316228, 1e-6);
    EXPECT_NEAR(step.state.v[0], 0.1, 1e-15);
}

TEST(RmsProp, QuadraticDescentFollowsRecurrence) {
    // f(z) = 0.5 |z|^2, gradient z; oracle is the recurrence in long double
    RmsPropParams p;
    p.alpha = 0.01;
    RmsPropState<double> state(p, {4});
    TensorD z({4}, {1.0, -2.0, 0.5, 3.0});
    std::vector<long double> rz{1.0L, -2.0L, 0.5L, 3.0L}, rv(4, 0.0L);
    double prev = 0.5 * z.values().squaredNorm();
    for (int t = 0; t < 50; ++t) {
        auto step = rmsprop_step(state, z, z);
        z = step.z;
        state = step.state;
        for (std::size_t i = 0; i < 4; ++i) {
            const long double g = rz[i];
            rv[i] = 0.9L * rv[i] + 0.1L * g * g;
            rz[i] -= 0.01L * g / (std::sqrt(rv[i]) + 1e-8L);
        }
        const double f = 0.5 * z.values().squaredNorm();
        EXPECT_LT(f, prev);
        prev = f;
    }
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(z[i], static_cast<double>(rz[i]), 1e-12);
}

TEST(RmsProp, RowsEqualBatch) {
    RngState rng(2);
    const TensorF z = randn(rng, {5, 3});
    const TensorF g = randn(rng, {5, 3});
    const auto batch = rmsprop_step(RmsPropState<float>(RmsPropParams{}, {5, 3}), z, g);
    for (std::size_t b = 0; b < 5; ++b) {
        const auto row = rmsprop_step(RmsPropState<float>(RmsPropParams{}, {3}), TensorF({3}, z.row(b)),
                                      TensorF({3}, g.row(b)));
        EXPECT_EQ(row.z.values(), batch.z.row(b));
    }
}

TEST(RmsProp, StateNonNegativeAndStepBounded) {
    // |dz| = alpha |g| / sqrt(v) <= alpha / sqrt(1 - rho) after any history
    RngState rng(3);
    RmsPropState<double> state(RmsPropParams{}, {8});
    TensorD z = randn(rng, {8}).cast<double>();
    const double bound = 0.01 / std::sqrt(0.1) + 1e-12;
    for (int t = 0; t < 200; ++t) {
        const TensorD g = randn(rng, {8}, t % 20 == 0 ? 100.0 : 0.01).cast<double>();
        auto step = rmsprop_step(state, z, g);
        for (std::size_t i = 0; i < 8; ++i) {
            EXPECT_GE(step.state.v[i], 0.0);
            EXPECT_LE(std::abs(step.z[i] - z[i]), bound);
        }
        z = step.z;
        state = step.state;
    }
}

TEST(RmsProp, RejectsBadInput) {
    EXPECT_THROW(RmsPropState<float>(RmsPropParams{0.0}, {2}), NumericalError);
    EXPECT_THROW(RmsPropState<float>(RmsPropParams{0.01, 1.0}, {2}), NumericalError);
    const RmsPropState<float> state(RmsPropParams{}, {2});
    EXPECT_THROW(rmsprop_step(state, TensorF({3}), TensorF({3})), ShapeError);
    TensorF g({2});
    g.values()[0] = NAN;
    EXPECT_THROW(rmsprop_step(state, TensorF({2}), g), NumericalError);
}

TEST(Sgd, ClosedFormsAndConvergence) {
    EXPECT_NEAR(sgd_step(TensorD({1}, {1.0}), TensorD({1}, {1.0}), 0.1)[0], 0.9, 1e-15);
    const TensorD z({2}, {3.0, -1.0});
    EXPECT_EQ(sgd_step(z, TensorD({2}), 0.5), z);

    // quadratic: z <- 0.9 z
    TensorD w({2}, {1.0, -1.0});
    for (int t = 0; t < 100; ++t) w = sgd_step(w, w, 0.1);
    EXPECT_LT(std::abs(w[0]), 1e-4);
    EXPECT_NEAR(w[0], std::pow(0.9, 100), 1e-15);
}
