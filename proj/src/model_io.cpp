#include "latent_invert/model_io.hpp"

#include <limits>
#include <string>

#include "binary.hpp"

namespace latent_invert {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxLayers = 4096;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

struct TensorDecl {
    Shape shape;
    std::size_t numel = 0;
};

struct LayerRecord {
    LayerKind kind{};
    std::uint32_t stride = 1;
    std::uint32_t padding = 0;
    float scalar = 0.0f;  // epsilon or slope
    Shape reshape;
    std::vector<TensorDecl> tensors;
};

std::size_t expected_tensor_count(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense:
        case LayerKind::ConvTranspose2d: return 2;
        case LayerKind::BatchNormInference: return 4;
        default: return 0;
    }
}

void write_decl(detail::ByteWriter& w, const Shape& shape) {
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) w.u64(e);
}

template <typename Derived>
void write_values(detail::ByteWriter& w, const Eigen::DenseBase<Derived>& values) {
    // row-major order for matrices
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c) w.f32(values.derived()(r, c));
}

std::string at_layer(std::size_t k) { return "layer " + std::to_string(k) + ": "; }

}  // namespace

std::vector<std::uint8_t> encode_generator(const Generator& g) {
    detail::ByteWriter header;
    detail::ByteWriter payload;
    header.bytes(kMagic, 4);
    header.u32(kVersion);
    header.u32(static_cast<std::uint32_t>(g.layer_count()));
    header.u32(static_cast<std::uint32_t>(g.latent_dim()));

    for (const auto& layer : g.layers()) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                header.u8(static_cast<std::uint8_t>(L::kind));
                if constexpr (std::is_same_v<L, Dense<float>>) {
                    header.u32(2);
                    write_decl(header, {static_cast<std::size_t>(l.weight.rows()),
                                        static_cast<std::size_t>(l.weight.cols())});
                    write_decl(header, {static_cast<std::size_t>(l.bias.size())});
                    write_values(payload, l.weight);
                    write_values(payload, l.bias);
                } else if constexpr (std::is_same_v<L, ConvTranspose2d<float>>) {
                    header.u32(static_cast<std::uint32_t>(l.stride));
                    header.u32(static_cast<std::uint32_t>(l.padding));
                    header.u32(2);
                    write_decl(header, {l.in_channels, l.out_channels, l.kernel_h, l.kernel_w});
                    write_decl(header, {l.out_channels});
                    write_values(payload, l.kernel);
                    write_values(payload, l.bias);
                } else if constexpr (std::is_same_v<L, BatchNormInference<float>>) {
                    header.f32(l.epsilon);
                    header.u32(4);
                    for (const auto* v : {&l.gamma, &l.beta, &l.running_mean, &l.running_var}) {
                        write_decl(header, {static_cast<std::size_t>(v->size())});
                        write_values(payload, *v);
                    }
                } else if constexpr (std::is_same_v<L, LeakyReLU<float>>) {
                    header.f32(l.slope);
                    header.u32(0);
                } else if constexpr (std::is_same_v<L, Reshape<float>>) {
                    header.u32(static_cast<std::uint32_t>(l.target.size()));
                    for (std::size_t e : l.target) header.u32(static_cast<std::uint32_t>(e));
                    header.u32(0);
                } else {
                    header.u32(0);
                }
            },
            layer);
    }
    auto bytes = std::move(header.buffer());
    bytes.insert(bytes.end(), payload.buffer().begin(), payload.buffer().end());
    return bytes;
}

Generator decode_generator(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    char magic[4];
    r.read(magic, 4, "header");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not a GANW file");
    const std::uint32_t version = r.u32("header");
    if (version != kVersion) throw FormatError("unsupported GANW version " + std::to_string(version));
    const std::uint32_t layer_count = r.u32("header");
    if (layer_count == 0 || layer_count > kMaxLayers)
        throw FormatError("invalid layer count " + std::to_string(layer_count));
    const std::uint32_t latent_dim = r.u32("header");
    if (latent_dim == 0) throw FormatError("latent_dim must be positive");

    std::vector<LayerRecord> records(layer_count);
    std::uint64_t payload_elements = 0;
    for (std::size_t k = 0; k < layer_count; ++k) {
        LayerRecord& rec = records[k];
        const std::uint8_t tag = r.u8("layer header");
        if (tag > static_cast<std::uint8_t>(LayerKind::Reshape))
            throw FormatError(at_layer(k) + "unknown layer kind " + std::to_string(tag));
        rec.kind = static_cast<LayerKind>(tag);
        switch (rec.kind) {
            case LayerKind::ConvTranspose2d:
                rec.stride = r.u32("layer header");
                rec.padding = r.u32("layer header");
                if (rec.stride == 0) throw FormatError(at_layer(k) + "stride must be >= 1");
                break;
            case LayerKind::BatchNormInference:
            case LayerKind::LeakyReLU:
                rec.scalar = r.f32("layer header");
                if (!std::isfinite(rec.scalar)) throw FormatError(at_layer(k) + "non-finite hyperparameter");
                break;
            case LayerKind::Reshape: {
                const std::uint32_t rank = r.u32("layer header");
                if (rank == 0 || rank > kMaxRank) throw FormatError(at_layer(k) + "invalid reshape rank");
                for (std::uint32_t i = 0; i < rank; ++i) {
                    const std::uint32_t e = r.u32("layer header");
                    if (e == 0) throw FormatError(at_layer(k) + "reshape extent is zero");
                    rec.reshape.push_back(e);
                }
                break;
            }
            default: break;
        }
        const std::uint32_t tensor_count = r.u32("layer header");
        if (tensor_count != expected_tensor_count(rec.kind))
            throw FormatError(at_layer(k) + layer_kind_name(rec.kind) + " expects " +
                              std::to_string(expected_tensor_count(rec.kind)) + " tensors, file declares " +
                              std::to_string(tensor_count));
        for (std::uint32_t t = 0; t < tensor_count; ++t) {
            TensorDecl decl;
            const std::uint32_t rank = r.u32("tensor header");
            if (rank == 0 || rank > kMaxRank) throw FormatError(at_layer(k) + "invalid tensor rank " + std::to_string(rank));
            std::uint64_t numel = 1;
            for (std::uint32_t i = 0; i < rank; ++i) {
                const std::uint64_t e = r.u64("tensor header");
                if (e == 0) throw FormatError(at_layer(k) + "tensor extent is zero");
                if (e > kMaxElements / numel) throw FormatError(at_layer(k) + "tensor extents too large");
                numel *= e;
                decl.shape.push_back(static_cast<std::size_t>(e));
            }
            decl.numel = static_cast<std::size_t>(numel);
            payload_elements += numel;
            if (payload_elements > kMaxElements) throw FormatError("declared payload too large");
            rec.tensors.push_back(std::move(decl));
        }
    }

    if (payload_elements * 4 > r.remaining()) throw FormatError("truncated payload");
    if (payload_elements * 4 < r.remaining()) throw FormatError("trailing bytes after payload");

    auto read_vec = [&](const TensorDecl& d, std::size_t k) {
        Vector<float> v(static_cast<Eigen::Index>(d.numel));
        r.read(v.data(), d.numel * 4, "payload");
        if (!all_finite(v)) throw FormatError(at_layer(k) + "non-finite weight");
        return v;
    };
    auto require_rank = [](const TensorDecl& d, std::size_t rank, std::size_t k, const char* name) {
        if (d.shape.size() != rank)
            throw FormatError(at_layer(k) + name + " must have rank " + std::to_string(rank));
    };

    std::vector<Layer<float>> layers;
    layers.reserve(layer_count);
    for (std::size_t k = 0; k < layer_count; ++k) {
        const LayerRecord& rec = records[k];
        switch (rec.kind) {
            case LayerKind::Dense: {
                require_rank(rec.tensors[0], 2, k, "Dense weight");
                require_rank(rec.tensors[1], 1, k, "Dense bias");
                Dense<float> d;
                const Vector<float> w = read_vec(rec.tensors[0], k);
                d.weight = Eigen::Map<const RowMajorMatrix<float>>(
                    w.data(), static_cast<Eigen::Index>(rec.tensors[0].shape[0]),
                    static_cast<Eigen::Index>(rec.tensors[0].shape[1]));
                d.bias = read_vec(rec.tensors[1], k);
                layers.emplace_back(std::move(d));
                break;
            }
            case LayerKind::ConvTranspose2d: {
                require_rank(rec.tensors[0], 4, k, "ConvTranspose2d kernel");
                require_rank(rec.tensors[1], 1, k, "ConvTranspose2d bias");
                TensorF kernel(rec.tensors[0].shape, read_vec(rec.tensors[0], k));
                Vector<float> bias = read_vec(rec.tensors[1], k);
                layers.emplace_back(ConvTranspose2d<float>(kernel, std::move(bias), rec.stride, rec.padding));
                break;
            }
            case LayerKind::BatchNormInference: {
                BatchNormInference<float> bn;
                for (const auto& t : rec.tensors) require_rank(t, 1, k, "BatchNormInference parameter");
                bn.gamma = read_vec(rec.tensors[0], k);
                bn.beta = read_vec(rec.tensors[1], k);
                bn.running_mean = read_vec(rec.tensors[2], k);
                bn.running_var = read_vec(rec.tensors[3], k);
                bn.epsilon = rec.scalar;
                layers.emplace_back(std::move(bn));
                break;
            }
            case LayerKind::ReLU: layers.emplace_back(ReLU<float>{}); break;
            case LayerKind::LeakyReLU: layers.emplace_back(LeakyReLU<float>{rec.scalar}); break;
            case LayerKind::Tanh: layers.emplace_back(Tanh<float>{}); break;
            case LayerKind::Sigmoid: layers.emplace_back(Sigmoid<float>{}); break;
            case LayerKind::Reshape: layers.emplace_back(Reshape<float>{rec.reshape}); break;
        }
    }
    try {
        return Generator(latent_dim, std::move(layers));
    } catch (const Error& e) {
        throw FormatError(std::string("invalid generator: ") + e.what());
    }
}

void save_generator(const Generator& g, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_generator(g));
}

Generator load_generator(const std::filesystem::path& path) {
    try {
        return decode_generator(detail::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

}  // namespace latent_invert
