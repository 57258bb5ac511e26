#include "latent_invert/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "binary.hpp"
#include "latent_invert/evaluation.hpp"
#include "latent_invert/gradcheck.hpp"
#include "latent_invert/inversion.hpp"
#include "latent_invert/model_io.hpp"
#include "latent_invert/tensor_io.hpp"

namespace latent_invert {

namespace fs = std::filesystem;

namespace {

/// Usage errors: bad flags, missing paths, mismatched inputs.
class UsageError : public Error {
public:
    using Error::Error;
};

struct InversionFlags {
    std::uint64_t seed = 0;
    double beta = 0.01;
    double lr = 0.01;
    std::string loss = "bce";
    std::string prior = "gaussian";
    std::size_t max_iters = 10000;
    double rel_tol = 1e-5;
    std::size_t patience = 50;
    std::size_t restarts = 0;
    std::size_t log_every = 0;

    void add_to(CLI::App& app) {
        app.add_option("--seed", seed, "RNG seed")->capture_default_str();
        app.add_option("--beta", beta, "weight of the Gaussian log-prior penalty")->capture_default_str();
        app.add_option("--lr", lr, "RMSprop learning rate")->capture_default_str();
        app.add_option("--loss", loss, "reconstruction loss")
            ->check(CLI::IsMember({"bce", "mse"}))
            ->capture_default_str();
        app.add_option("--prior", prior, "latent prior: gaussian = N(0,1), uniform = U[-1,1]")
            ->check(CLI::IsMember({"gaussian", "uniform"}))
            ->capture_default_str();
        app.add_option("--max-iters", max_iters, "objective evaluations per run")->capture_default_str();
        app.add_option("--rel-tol", rel_tol, "relative improvement threshold")->capture_default_str();
        app.add_option("--patience", patience, "convergence window (0 disables)")->capture_default_str();
        app.add_option("--restarts", restarts, "extra runs from fresh prior samples")->capture_default_str();
        app.add_option("--log-every", log_every, "log mean loss every N iterations (0 = quiet)");
    }

    PriorSpec prior_spec() const { return prior == "uniform" ? PriorSpec::uniform(-1.0, 1.0) : PriorSpec::gaussian(); }

    InversionConfig config() const {
        InversionConfig cfg;
        cfg.objective.loss = parse_loss(loss);
        cfg.objective.beta = beta;
        cfg.objective.prior = prior_spec();
        cfg.optimizer.alpha = lr;
        cfg.max_iters = max_iters;
        cfg.rel_tol = rel_tol;
        cfg.patience = patience;
        cfg.seed = seed;
        cfg.restarts = restarts;
        cfg.log_every = log_every;
        try {
            cfg.validate();
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: '" + p.string() + "'");
}

void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
}

bool is_pnm(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// Expands directories into their PNM files (sorted by name); plain files pass through.
std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& s : inputs) {
        const fs::path p(s);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_regular_file() && is_pnm(entry.path())) found.push_back(entry.path());
            std::sort(found.begin(), found.end());
            if (found.empty()) throw UsageError("no PNM images in directory '" + p.string() + "'");
            out.insert(out.end(), found.begin(), found.end());
        } else {
            require_file(p, "image");
            out.push_back(p);
        }
    }
    if (out.empty()) throw UsageError("no input images");
    return out;
}

TensorF load_batch(const std::vector<fs::path>& paths, const Generator& g) {
    std::vector<TensorF> images;
    images.reserve(paths.size());
    for (const auto& p : paths) {
        TensorF img = read_image(p);
        if (img.shape() != g.output_shape())
            throw UsageError("image '" + p.string() + "' has shape " + shape_string(img.shape()) +
                             " but the model produces " + shape_string(g.output_shape()));
        images.push_back(std::move(img));
    }
    return TensorF::stack(images);
}

/// Generator output batch as [B, C, H, W] in [0,1].
TensorF as_image_batch(const Generator& g, const TensorF& outputs) {
    if (g.output_shape().size() != 3)
        throw UsageError("model output " + shape_string(g.output_shape()) + " is not an image [C,H,W]");
    return to_image_space(g.output_range(), outputs);
}

std::size_t thread_cap() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LATENT_INVERT_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) n = static_cast<std::size_t>(v);
    }
    return n;
}

/// Tracks files written by a command and deletes them if the command fails.
class OutputSet {
public:
    void write(const fs::path& p, const std::string& text) {
        detail::write_file_atomic(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        written_.push_back(p);
    }
    template <typename F>
    void add(const fs::path& p, F&& writer) {
        writer(p);
        written_.push_back(p);
    }
    void commit() { written_.clear(); }
    ~OutputSet() {
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
    }

private:
    std::vector<fs::path> written_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

int cmd_invert(const std::string& model_path, const std::vector<std::string>& image_args, const fs::path& out_dir,
               const InversionFlags& flags, std::size_t cols, std::ostream& out) {
    require_file(model_path, "model");
    const auto paths = collect_images(image_args);
    const InversionConfig cfg = flags.config();
    prepare_out_dir(out_dir);

    const Generator g = load_generator(model_path);
    const TensorF targets = load_batch(paths, g);
    const std::size_t batch = targets.extent(0);
    const auto result = invert(g, targets, cfg);

    // grid: for each block of `cols` samples, a row of targets then a row of reconstructions
    const std::size_t c = std::min(cols == 0 ? std::min<std::size_t>(batch, 8) : cols, batch);
    const TensorF recon = as_image_batch(g, result.recon);
    std::vector<TensorF> tiles;
    const TensorF blank = TensorF::filled(g.output_shape(), 1.0f);
    for (std::size_t start = 0; start < batch; start += c) {
        for (const TensorF* src : {&targets, &recon})
            for (std::size_t j = start; j < start + c; ++j)
                tiles.push_back(j < batch ? TensorF(g.output_shape(), src->row(j)) : blank);
    }

    std::ostringstream csv;
    csv << "index,image,loss,mse\n";
    for (std::size_t b = 0; b < batch; ++b)
        csv << b << ',' << paths[b].filename().string() << ',' << fmt(result.per_sample_loss[b]) << ','
            << fmt(result.per_sample_mse[b]) << '\n';

    OutputSet outputs;
    outputs.add(out_dir / "z.tnsr", [&](const fs::path& p) { write_tensor(result.z_star, p); });
    const fs::path grid_path = out_dir / (std::string("recon_grid") + image_extension(g.output_shape()[0]));
    outputs.add(grid_path, [&](const fs::path& p) { write_grid(TensorF::stack(tiles), c, p); });
    outputs.write(out_dir / "losses.csv", csv.str());
    outputs.commit();

    out << "inverted " << batch << " image(s); mean mse " << fmt(mean(result.per_sample_mse)) << ", "
        << result.iters_used << " updates\n";
    return kExitOk;
}

std::vector<std::size_t> subsample(std::size_t available, std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(available);
    for (std::size_t i = 0; i < available; ++i) idx[i] = i;
    if (n == 0 || n >= available) return idx;
    RngState rng(derive_seed(seed, 0x5ab5a3b1e));
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.next_index(available - i)]);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

int cmd_evaluate(const std::vector<std::string>& model_paths, const std::vector<std::string>& image_args,
                 const fs::path& out_dir, const InversionFlags& flags, std::size_t n, std::ostream& out) {
    if (model_paths.size() < 2) throw UsageError("evaluate needs at least two --model files to compare");
    for (const auto& m : model_paths) require_file(m, "model");
    auto paths = collect_images(image_args);
    const InversionConfig cfg = flags.config();
    prepare_out_dir(out_dir);

    std::vector<fs::path> chosen;
    for (std::size_t i : subsample(paths.size(), n, cfg.seed)) chosen.push_back(paths[i]);

    std::vector<Generator> models;
    std::vector<std::string> names;
    std::map<std::string, int> seen;
    for (const auto& m : model_paths) {
        models.push_back(load_generator(m));
        std::string name = fs::path(m).stem().string();
        if (seen[name]++) name += "_" + std::to_string(seen[name] - 1);
        names.push_back(name);
    }
    std::vector<TensorF> batches;
    for (const auto& g : models) batches.push_back(load_batch(chosen, g));

    std::vector<ModelReport> reports(models.size());
    const std::size_t cap = thread_cap();
    for (std::size_t start = 0; start < models.size(); start += cap) {
        std::vector<std::future<ModelReport>> jobs;
        for (std::size_t i = start; i < std::min(models.size(), start + cap); ++i)
            jobs.push_back(std::async(std::launch::async,
                                      [&, i] { return evaluate_model(models[i], batches[i], cfg, names[i]); }));
        for (std::size_t i = start; i < start + jobs.size(); ++i) reports[i] = jobs[i - start].get();
    }

    const ComparisonTable table = compare_models(reports);
    OutputSet outputs;
    for (const auto& r : reports) outputs.write(out_dir / ("report_" + r.model_name + ".json"), report_to_json(r));
    outputs.write(out_dir / "comparison.csv", table.to_csv());
    outputs.write(out_dir / "comparison.json", table.to_json());
    outputs.commit();

    out << table.to_csv();
    return kExitOk;
}

int cmd_sample(const std::string& model_path, const fs::path& out_dir, std::size_t n, std::size_t cols,
               std::uint64_t seed, const std::string& prior_name, std::ostream& out) {
    require_file(model_path, "model");
    if (n == 0) throw UsageError("--n must be >= 1");
    prepare_out_dir(out_dir);
    const Generator g = load_generator(model_path);
    const PriorSpec prior = prior_name == "uniform" ? PriorSpec::uniform(-1.0, 1.0) : PriorSpec::gaussian();
    std::vector<TensorF> rows;
    for (std::size_t i = 0; i < n; ++i) {
        RngState rng(row_seed(seed, i, 0));
        rows.push_back(prior.sample(rng, {g.latent_dim()}));
    }
    const auto fwd = forward(g, TensorF::stack(rows));
    const TensorF images = as_image_batch(g, fwd.output);
    const std::size_t c = cols ? cols : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const fs::path path = out_dir / (std::string("samples") + image_extension(g.output_shape()[0]));
    write_grid(images, c, path);
    out << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_gradcheck(const std::string& model_path, const InversionFlags& flags, double step, double tol,
                  std::ostream& out) {
    require_file(model_path, "model");
    const InversionConfig cfg = flags.config();
    const Generator g = load_generator(model_path);
    Objective obj = cfg.objective;
    if (obj.loss == LossKind::BCE && g.output_range() != OutputRange::UnitInterval) obj.loss = LossKind::MSE;
    const GradcheckReport report = gradcheck(g, obj, cfg.seed, step);

    out << "target,kind,coords,worst_index,analytic,numeric,rel_err\n";
    auto line = [&](const std::string& name, const GradcheckEntry& e) {
        out << name << ',' << e.kind << ',' << e.coords_checked << ',' << e.worst_index << ',' << fmt(e.analytic)
            << ',' << fmt(e.numeric) << ',' << fmt(e.rel_err) << '\n';
    };
    line("latent", report.latent);
    for (const auto& e : report.layers) line("layer" + std::to_string(e.layer), e);
    const bool ok = report.latent.rel_err <= tol;
    out << (ok ? "PASS" : "FAIL") << " max latent rel err " << fmt(report.latent.rel_err) << " (tol " << fmt(tol)
        << ")\n";
    return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Recover latent codes of a frozen generator by gradient descent on its input"};
    app.require_subcommand(1);

    InversionFlags flags;
    std::string model;
    std::vector<std::string> models;
    std::vector<std::string> images;
    std::string out_dir;
    std::size_t cols = 0;
    std::size_t n = 0;
    std::size_t sample_n = 64;
    double step = 1e-3;
    double tol = 1e-3;

    auto* inv = app.add_subcommand("invert", "invert images through a generator");
    inv->add_option("--model", model, "GANW generator file")->required();
    inv->add_option("--images", images, "PNM image files or directories")->required();
    inv->add_option("--out", out_dir, "output directory")->required();
    inv->add_option("--cols", cols, "grid columns (default min(B, 8))");
    flags.add_to(*inv);

    auto* ev = app.add_subcommand("evaluate", "compare models by reconstruction MSE");
    ev->add_option("--model", models, "GANW generator files (two or more)")->required();
    ev->add_option("--images", images, "held-out PNM images or directory")->required();
    ev->add_option("--out", out_dir, "output directory")->required();
    ev->add_option("--n", n, "subsample this many images by seed (0 = all)");
    flags.add_to(*ev);

    auto* sm = app.add_subcommand("sample", "render a grid of generator samples");
    sm->add_option("--model", model, "GANW generator file")->required();
    sm->add_option("--out", out_dir, "output directory")->required();
    sm->add_option("--n", sample_n, "number of samples")->capture_default_str();
    sm->add_option("--cols", cols, "grid columns (default ceil(sqrt(n)))");
    sm->add_option("--seed", flags.seed, "RNG seed");
    sm->add_option("--prior", flags.prior, "latent prior")->check(CLI::IsMember({"gaussian", "uniform"}));

    auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
    gc->add_option("--model", model, "GANW generator file")->required();
    gc->add_option("--step", step, "finite-difference step")->capture_default_str();
    gc->add_option("--tol", tol, "pass threshold on latent relative error")->capture_default_str();
    flags.add_to(*gc);

    std::vector<std::string> argv_store{"latent-invert"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    auto fail = [&](const char* kind, const std::string& msg, int code) {
        err << "error: " << kind << ": " << msg << '\n';
        return code;
    };
    try {
        if (inv->parsed()) return cmd_invert(model, images, out_dir, flags, cols, out);
        if (ev->parsed()) return cmd_evaluate(models, images, out_dir, flags, n, out);
        if (sm->parsed()) return cmd_sample(model, out_dir, sample_n, cols, flags.seed, flags.prior, out);
        if (gc->parsed()) return cmd_gradcheck(model, flags, step, tol, out);
    } catch (const UsageError& e) {
        return fail("usage", e.what(), kExitUsage);
    } catch (const IoError& e) {
        return fail("io", e.what(), kExitUsage);
    } catch (const FormatError& e) {
        return fail("format", e.what(), kExitUsage);
    } catch (const NumericalError& e) {
        return fail("numerical", e.what(), kExitNumerical);
    } catch (const Error& e) {
        return fail("usage", e.what(), kExitUsage);
    }
    return kExitUsage;
}

}  // namespace latent_invert
