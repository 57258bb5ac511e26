#include "latent_invert/tensor_io.hpp"

#include <limits>
#include <string>

#include "binary.hpp"

namespace latent_invert {

namespace {
constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 16;
}  // namespace

std::vector<std::uint8_t> encode_tensor(const TensorF& t) {
    if (t.empty()) throw ShapeError("cannot encode an empty tensor");
    detail::ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u64(e);
    w.bytes(t.data(), t.size() * sizeof(float));
    return std::move(w.buffer());
}

TensorF decode_tensor(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    char magic[4];
    r.read(magic, 4, "header");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not a TNSR file");
    const std::uint32_t version = r.u32("header");
    if (version != kVersion) throw FormatError("unsupported TNSR version " + std::to_string(version));
    const std::uint32_t rank = r.u32("header");
    if (rank == 0 || rank > kMaxRank) throw FormatError("invalid TNSR rank " + std::to_string(rank));
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
        const std::uint64_t v = r.u64("extents");
        if (v == 0) throw FormatError("TNSR extent is zero");
        if (v > std::numeric_limits<std::uint64_t>::max() / 4 / count) throw FormatError("TNSR extents overflow");
        count *= v;
        e = static_cast<std::size_t>(v);
    }
    if (count * 4 > r.remaining()) throw FormatError("truncated payload");
    if (count * 4 < r.remaining()) throw FormatError("trailing bytes after TNSR payload");
    Vector<float> data(static_cast<Eigen::Index>(count));
    r.read(data.data(), count * 4, "payload");
    if (!all_finite(data)) throw FormatError("TNSR payload contains non-finite values");
    return TensorF(std::move(shape), std::move(data));
}

void write_tensor(const TensorF& t, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_tensor(t));
}

TensorF read_tensor(const std::filesystem::path& path) { return decode_tensor(detail::read_file(path)); }

}  // namespace latent_invert
