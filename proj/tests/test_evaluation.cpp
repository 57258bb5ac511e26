#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "latent_invert/evaluation.hpp"
#include "test_support.hpp"

using namespace latent_invert;
using namespace latent_invert::testing;

namespace {

ModelReport fixture_report(const std::string& name, std::vector<double> mse, const std::string& digest = "d") {
    ModelReport r;
    r.model_name = name;
    r.per_sample_mse = std::move(mse);
    r.digest = digest;
    summarize(r);
    return r;
}

std::vector<std::string> names(const ComparisonTable& t) {
    std::vector<std::string> out;
    for (const auto& r : t.rows) out.push_back(r.model_name);
    return out;
}

Generator gray_toy() {
    Dense<float> d;
    d.weight = RowMajorMatrix<float>::Ones(4, 2);
    d.bias = Vector<float>::Zero(4);
    return Generator(2, {d, Sigmoid<float>{}, Reshape<float>{{1, 2, 2}}});
}

}  // namespace

TEST(Compare, OrdersByAscendingMeanMse) {
    const auto table = compare_models({fixture_report("GAN", {0.118}), fixture_report("GAN+noise", {0.109}),
                                       fixture_report("WGAN", {0.042})});
    EXPECT_EQ(names(table), (std::vector<std::string>{"WGAN", "GAN+noise", "GAN"}));
}

TEST(Compare, NeedsTwoReportsOnTheSameData) {
    EXPECT_THROW(compare_models({fixture_report("a", {0.1})}), Error);
    EXPECT_THROW(compare_models({fixture_report("a", {0.1}, "x"), fixture_report("b", {0.2}, "y")}), Error);
}

TEST(Compare, TiesBreakByName) {
    const auto table = compare_models({fixture_report("zeta", {0.3, 0.1}), fixture_report("alpha", {0.3, 0.1})});
    EXPECT_EQ(names(table), (std::vector<std::string>{"alpha", "zeta"}));
}

TEST(Compare, RankingInvariantUnderPositiveScaling) {
    RngState rng(1);
    std::vector<ModelReport> reports;
    for (int m = 0; m < 6; ++m) {
        std::vector<double> v;
        for (int i = 0; i < 9; ++i) v.push_back(rng.next_unit());
        reports.push_back(fixture_report("m" + std::to_string(m), v));
    }
    const auto base = names(compare_models(reports));
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
        auto scaled = reports;
        for (auto& r : scaled) {
            for (auto& v : r.per_sample_mse) v *= c;
            summarize(r);
        }
        EXPECT_EQ(names(compare_models(scaled)), base) << c;
    }
}

TEST(Compare, CsvAndJson) {
    const auto table = compare_models({fixture_report("b", {0.25, 0.75}), fixture_report("a", {0.5})});
    const std::string csv = table.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,n,mean_mse,median_mse,iters,beta,alpha,loss,seed,digest");
    EXPECT_EQ(csv, compare_models({fixture_report("b", {0.25, 0.75}), fixture_report("a", {0.5})}).to_csv());
    const auto json = nlohmann::json::parse(table.to_json());
    ASSERT_EQ(json.size(), 2u);
    EXPECT_EQ(json[0]["model"], "a");
    EXPECT_EQ(json[1]["per_sample_mse"].size(), 2u);
}

TEST(Report, SummaryAndConsistencyCheck) {
    ModelReport r = fixture_report("x", {0.4, 0.1, 0.3, 0.2});
    EXPECT_EQ(r.n_samples, 4u);
    EXPECT_DOUBLE_EQ(r.mean_mse, 0.25);
    EXPECT_DOUBLE_EQ(r.median_mse, 0.25);
    EXPECT_NO_THROW(check_report(r));
    r.mean_mse = 0.3;
    EXPECT_THROW(check_report(r), Error);
    EXPECT_DOUBLE_EQ(fixture_report("y", {0.9, 0.1, 0.5}).median_mse, 0.5);
}

TEST(Digest, OrderSensitiveAndStable) {
    RngState rng(2);
    const TensorF a = sample_uniform<float>(rng, {3, 1, 2, 2}, 0.0, 1.0);
    TensorF swapped = a;
    swapped.set_row(0, a.row(1));
    swapped.set_row(1, a.row(0));
    EXPECT_EQ(test_set_digest(a).size(), 16u);
    EXPECT_EQ(test_set_digest(a), test_set_digest(a));
    EXPECT_NE(test_set_digest(a), test_set_digest(swapped));
    EXPECT_NE(test_set_digest(a), test_set_digest(a.reshaped({3, 4})));
}

TEST(Evaluate, SingleGrayTarget) {
    InversionConfig cfg;
    cfg.max_iters = 50;
    const auto r = evaluate_model(gray_toy(), TensorF::filled({1, 1, 2, 2}, 0.5f), cfg, "toy");
    EXPECT_EQ(r.per_sample_mse.size(), 1u);
    EXPECT_EQ(r.model_name, "toy");
    EXPECT_NO_THROW(check_report(r));
}

TEST(Evaluate, SelfInversionFixture) {
    const Generator g = self_inversion_generator();
    RngState rng(3);
    const TensorF x = forward(g, randn(rng, {10, 8})).output;
    InversionConfig cfg;
    cfg.restarts = 3;
    const auto r = evaluate_model(g, x, cfg, "self");
    EXPECT_LE(r.mean_mse, 1e-3);
    EXPECT_EQ(r.digest, test_set_digest(x));
    EXPECT_EQ(r.loss, "bce");
    EXPECT_DOUBLE_EQ(r.beta, 0.01);
    EXPECT_DOUBLE_EQ(r.alpha, 0.01);
}

TEST(Evaluate, ConvergedRunBeatsThePriorSample) {
    const Generator g = self_inversion_generator();
    RngState rng(4);
    const TensorF x = forward(g, randn(rng, {6, 8})).output;
    InversionConfig cfg;
    cfg.seed = 5;
    cfg.max_iters = 1;
    const auto initial = evaluate_model(g, x, cfg);
    cfg.max_iters = 10000;
    const auto converged = evaluate_model(g, x, cfg);
    EXPECT_GT(initial.mean_mse, converged.mean_mse);

    // with one evaluation the report is the MSE of the prior sample's reconstruction
    TensorF z0({6, 8});
    for (std::size_t b = 0; b < 6; ++b) {
        RngState row(row_seed(5, b, 0));
        z0.set_row(b, sample_gaussian<float>(row, {8}, 0.0, 1.0).values());
    }
    const TensorF y0 = forward(g, z0).output;
    double acc = 0.0;
    for (std::size_t b = 0; b < 6; ++b) acc += mse<float>(y0.row(b), x.row(b));
    EXPECT_NEAR(initial.mean_mse, acc / 6.0, 1e-7);
}
