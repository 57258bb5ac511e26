#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latent_invert/generator.hpp"
#include "latent_invert/inversion.hpp"
#include "latent_invert/tensor.hpp"

namespace latent_invert {

/// Reconstruction-error summary for one model on one test set. MSE values are
/// in [0,1] pixel space whatever the generator's codomain.
struct ModelReport {
    std::string model_name;
    std::size_t n_samples = 0;
    double mean_mse = 0.0;
    double median_mse = 0.0;
    std::vector<double> per_sample_mse;
    std::size_t iters_used = 0;
    double beta = 0.0;
    double alpha = 0.0;
    std::string loss;
    std::uint64_t seed = 0;
    std::string digest;  // test_set_digest of the images inverted
};

/// FNV-1a (64-bit) over the extents and f32 bytes of `images`, as 16 hex digits.
/// Sensitive to image order.
std::string test_set_digest(const TensorF& images);

/// Fills n_samples, mean_mse and median_mse from per_sample_mse.
void summarize(ModelReport& report);

/// Throws if mean/median/n disagree with per_sample_mse.
void check_report(const ModelReport& report);

/// Inverts every test image ([N, ...output] in [0,1]) and aggregates per-sample MSE.
ModelReport evaluate_model(const Generator& g, const TensorF& test_images, const InversionConfig& cfg,
                           const std::string& model_name = "model");

/// Reports ordered by ascending mean_mse, ties broken by model_name.
struct ComparisonTable {
    std::vector<ModelReport> rows;

    /// Header: model,n,mean_mse,median_mse,iters,beta,alpha,loss,seed,digest
    std::string to_csv() const;
    std::string to_json() const;
};

ComparisonTable compare_models(std::vector<ModelReport> reports);

std::string report_to_json(const ModelReport& report);

}  // namespace latent_invert
