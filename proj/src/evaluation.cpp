#include "latent_invert/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace latent_invert {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

nlohmann::ordered_json report_json(const ModelReport& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model_name;
    j["n"] = r.n_samples;
    j["mean_mse"] = r.mean_mse;
    j["median_mse"] = r.median_mse;
    j["per_sample_mse"] = r.per_sample_mse;
    j["iters"] = r.iters_used;
    j["beta"] = r.beta;
    j["alpha"] = r.alpha;
    j["loss"] = r.loss;
    j["seed"] = r.seed;
    j["digest"] = r.digest;
    return j;
}

}  // namespace

std::string test_set_digest(const TensorF& images) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ull;
        }
    };
    for (std::size_t e : images.shape()) {
        const auto v = static_cast<std::uint64_t>(e);
        feed(&v, sizeof v);
    }
    feed(images.data(), images.size() * sizeof(float));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void summarize(ModelReport& report) {
    if (report.per_sample_mse.empty()) throw Error("report has no samples");
    report.n_samples = report.per_sample_mse.size();
    report.mean_mse = mean_of(report.per_sample_mse);
    report.median_mse = median_of(report.per_sample_mse);
}

void check_report(const ModelReport& report) {
    if (report.per_sample_mse.empty() || report.n_samples != report.per_sample_mse.size())
        throw Error("report '" + report.model_name + "': n does not match per-sample list");
    for (double v : report.per_sample_mse)
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error("report '" + report.model_name + "': invalid MSE value");
    if (report.mean_mse != mean_of(report.per_sample_mse) || report.median_mse != median_of(report.per_sample_mse))
        throw Error("report '" + report.model_name + "': mean/median do not match per-sample list");
}

ModelReport evaluate_model(const Generator& g, const TensorF& test_images, const InversionConfig& cfg,
                           const std::string& model_name) {
    if (test_images.rank() < 1) throw ShapeError("evaluate_model: no test images");
    const auto result = invert(g, test_images, cfg);

    ModelReport report;
    report.model_name = model_name;
    for (std::size_t i = 0; i < result.per_sample_mse.size(); ++i)
        report.per_sample_mse.push_back(static_cast<double>(result.per_sample_mse[i]));
    summarize(report);
    report.iters_used = result.iters_used;
    report.beta = cfg.objective.beta;
    report.alpha = cfg.optimizer.alpha;
    report.loss = loss_name(cfg.objective.loss);
    report.seed = cfg.seed;
    report.digest = test_set_digest(test_images);
    check_report(report);
    return report;
}

ComparisonTable compare_models(std::vector<ModelReport> reports) {
    if (reports.size() < 2) throw Error("compare_models needs at least two reports");
    for (const auto& r : reports) {
        check_report(r);
        if (r.digest != reports.front().digest)
            throw Error("test-set digest mismatch: '" + r.model_name + "' was evaluated on different images than '" +
                        reports.front().model_name + "'");
    }
    std::stable_sort(reports.begin(), reports.end(), [](const ModelReport& a, const ModelReport& b) {
        if (a.mean_mse != b.mean_mse) return a.mean_mse < b.mean_mse;
        return a.model_name < b.model_name;
    });
    return {std::move(reports)};
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream os;
    os << "model,n,mean_mse,median_mse,iters,beta,alpha,loss,seed,digest\n";
    for (const auto& r : rows)
        os << r.model_name << ',' << r.n_samples << ',' << fmt_double(r.mean_mse) << ','
           << fmt_double(r.median_mse) << ',' << r.iters_used << ',' << fmt_double(r.beta) << ','
           << fmt_double(r.alpha) << ',' << r.loss << ',' << r.seed << ',' << r.digest << '\n';
    return os.str();
}

std::string ComparisonTable::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) j.push_back(report_json(r));
    return j.dump(2) + "\n";
}

std::string report_to_json(const ModelReport& report) { return report_json(report).dump(2) + "\n"; }

}  // namespace latent_invert
