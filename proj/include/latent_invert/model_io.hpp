#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "latent_invert/generator.hpp"
#include "latent_invert/tensor.hpp"

namespace latent_invert {

// GANW generator weight file, version 1. Every field is little-endian.
//
//   char[4]  "GANW"
//   u32      version (= 1)
//   u32      layer_count (>= 1)
//   u32      latent_dim (>= 1)
//   layer_count records:
//     u8     kind tag (LayerKind)
//     hyperparameters by kind:
//       ConvTranspose2d     u32 stride, u32 padding
//       BatchNormInference  f32 epsilon
//       LeakyReLU           f32 slope
//       Reshape             u32 rank, rank x u32 extents (per-sample target shape)
//       others              none
//     u32    tensor_count (Dense 2, ConvTranspose2d 2, BatchNormInference 4, others 0)
//     tensor_count x { u32 rank, rank x u64 extents }
//   payload: f32 values of every declared tensor, in declaration order
//
// Tensors: Dense {weight [out,in], bias [out]}; ConvTranspose2d {kernel
// [in_ch,out_ch,kh,kw], bias [out_ch]}; BatchNormInference {gamma, beta,
// running_mean, running_var}, each [C]. The declared tensor sizes must sum to
// exactly the payload length.

std::vector<std::uint8_t> encode_generator(const Generator& g);
Generator decode_generator(std::span<const std::uint8_t> bytes);

void save_generator(const Generator& g, const std::filesystem::path& path);
Generator load_generator(const std::filesystem::path& path);

/// Binary PNM: P5 (grayscale) or P6 (RGB), maxval 255. Pixels map to v / 255
/// in a channel-major [C, H, W] tensor.
TensorF decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_image(const TensorF& image);

TensorF read_image(const std::filesystem::path& path);
/// Quantizes round(255 v), halves away from zero, after clamping to [0,1].
void write_image(const TensorF& image, const std::filesystem::path& path);

/// Tiles [B, C, H, W] images row-major into a [C, H', W'] canvas with 2-pixel
/// white gutters around every tile. Uses min(cols, B) columns.
TensorF make_grid(const TensorF& images, std::size_t cols);
void write_grid(const TensorF& images, std::size_t cols, const std::filesystem::path& path);

inline constexpr std::size_t kGridGutter = 2;

/// ".pgm" for one channel, ".ppm" for three.
const char* image_extension(std::size_t channels);

}  // namespace latent_invert
