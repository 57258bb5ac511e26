#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "latent_invert/tensor.hpp"

namespace latent_invert {

/// Raw tensor file ("TNSR"), all little-endian:
///   char[4] "TNSR" | u32 version = 1 | u32 rank | rank x u64 extents | f32 payload
std::vector<std::uint8_t> encode_tensor(const TensorF& t);
TensorF decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const TensorF& t, const std::filesystem::path& path);
TensorF read_tensor(const std::filesystem::path& path);

}  // namespace latent_invert
