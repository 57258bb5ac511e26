#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "binary.hpp"
#include "latent_invert/model_io.hpp"

namespace latent_invert {

namespace {

class PnmHeaderParser {
public:
    explicit PnmHeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t number(const char* field) {
        skip_space_and_comments();
        std::size_t value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (++digits > 9) throw FormatError(std::string("PNM ") + field + " is too large");
            ++pos_;
        }
        if (digits == 0) throw FormatError(std::string("malformed PNM header: missing ") + field);
        return value;
    }

    /// Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw FormatError("malformed PNM header: no separator before raster");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

constexpr std::size_t kMaxSide = 1 << 15;

std::uint8_t quantize(float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(c));
}

}  // namespace

const char* image_extension(std::size_t channels) { return channels == 3 ? ".ppm" : ".pgm"; }

TensorF decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError("malformed PNM header: expected P5 or P6");
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    PnmHeaderParser p(bytes);
    const std::size_t width = p.number("width");
    const std::size_t height = p.number("height");
    const std::size_t maxval = p.number("maxval");
    if (width == 0 || height == 0) throw FormatError("PNM image has zero size");
    if (width > kMaxSide || height > kMaxSide) throw FormatError("PNM image is too large");
    if (maxval != 255) throw FormatError("unsupported PNM maxval " + std::to_string(maxval) + " (need 255)");
    const std::size_t start = p.raster_start();
    const std::size_t plane = width * height;
    if (bytes.size() - start < plane * channels) throw FormatError("truncated PNM raster");

    TensorF img({channels, height, width});
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            img[c * plane + i] = static_cast<float>(bytes[start + i * channels + c]) / 255.0f;
    return img;
}

std::vector<std::uint8_t> encode_image(const TensorF& image) {
    if (image.rank() != 3 || (image.extent(0) != 1 && image.extent(0) != 3))
        throw ShapeError("image must be [1,H,W] or [3,H,W], got " + shape_string(image.shape()));
    const std::size_t channels = image.extent(0);
    const std::size_t height = image.extent(1);
    const std::size_t width = image.extent(2);
    const std::string header = std::string(channels == 3 ? "P6" : "P5") + "\n" + std::to_string(width) + " " +
                               std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t plane = width * height;
    out.reserve(out.size() + plane * channels);
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < channels; ++c) out.push_back(quantize(image[c * plane + i]));
    return out;
}

TensorF read_image(const std::filesystem::path& path) {
    try {
        return decode_image(detail::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

void write_image(const TensorF& image, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_image(image));
}

TensorF make_grid(const TensorF& images, std::size_t cols) {
    if (cols == 0) throw Error("grid needs at least one column");
    if (images.rank() != 4) throw ShapeError("grid expects [B,C,H,W], got " + shape_string(images.shape()));
    const std::size_t batch = images.extent(0);
    const std::size_t channels = images.extent(1);
    const std::size_t h = images.extent(2);
    const std::size_t w = images.extent(3);
    cols = std::min(cols, batch);
    const std::size_t rows = (batch + cols - 1) / cols;
    const std::size_t gh = rows * h + (rows + 1) * kGridGutter;
    const std::size_t gw = cols * w + (cols + 1) * kGridGutter;

    TensorF grid = TensorF::filled({channels, gh, gw}, 1.0f);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t y0 = kGridGutter + (b / cols) * (h + kGridGutter);
        const std::size_t x0 = kGridGutter + (b % cols) * (w + kGridGutter);
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    grid[(c * gh + y0 + y) * gw + x0 + x] = images[((b * channels + c) * h + y) * w + x];
    }
    return grid;
}

void write_grid(const TensorF& images, std::size_t cols, const std::filesystem::path& path) {
    write_image(make_grid(images, cols), path);
}

}  // namespace latent_invert
