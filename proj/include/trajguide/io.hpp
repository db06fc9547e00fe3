#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "trajguide/scene.hpp"
#include "trajguide/tensor.hpp"

namespace trajguide {

/// Binary tensor files: 16-byte header (magic "LTNS", dtype u8, rank u8 = 4,
/// reserved u16, four u16 dims C,T,H,W; all little-endian) followed by C-order
/// little-endian data. dtype 1 = float64, 2 = uint8.
enum class FileDtype : std::uint8_t { kFloat64 = 1, kUint8 = 2 };

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
void write_mask(const std::filesystem::path& path, const ValidityMask& mask);
/// Depth as float64 [1, 1, H, W]; invalid pixels are written as 0.
void write_depth(const std::filesystem::path& path, const DepthMap& depth);

Tensor read_tensor(const std::filesystem::path& path);
ValidityMask read_mask(const std::filesystem::path& path);
DepthMap read_depth(const std::filesystem::path& path);

/// 8-bit binary PGM (one channel) or PPM (three channels) of frame `t`;
/// values are clamped to [lo, hi] and scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Tensor& video, std::size_t channel, std::size_t t,
               double lo = 0.0, double hi = 1.0);
void write_ppm(const std::filesystem::path& path, const Tensor& video, std::size_t t, double lo = 0.0, double hi = 1.0);
/// All channels of frame `t` side by side in one PGM.
void write_channel_strip(const std::filesystem::path& path, const Tensor& video, std::size_t t, double lo = 0.0,
                         double hi = 1.0);
/// Reads an 8-bit binary PGM as a [1, 1, H, W] tensor with values in [0, 1].
Tensor read_pgm(const std::filesystem::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);
/// Hash of the tensor's shape and raw float64 values.
std::string tensor_hash(const Tensor& tensor);

/// Writes to `path.tmp` and renames, so readers never see a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace trajguide
