#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "latent_invert/error.hpp"

namespace latent_invert::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }

    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian cursor; every overrun is a FormatError.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

    void read(void* out, std::size_t n, const char* what) {
        if (n > remaining()) throw FormatError(std::string("truncated ") + what);
        std::memcpy(out, data_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        read(&v, 1, what);
        return v;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        read(&v, 4, what);
        return v;
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        read(&v, 8, what);
        return v;
    }
    float f32(const char* what) {
        float v;
        read(&v, 4, what);
        return v;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it into place, so readers never
/// observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace latent_invert::detail
