#pragma once

#include "hybridaug/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hybridaug {

/// Decodes an 8-bit grayscale or RGB PNG. Palette, 16-bit and alpha inputs
/// are normalized to 8-bit gray or RGB (alpha is dropped).
Raster read_png(const std::filesystem::path& path);
Raster decode_png(std::span<const std::uint8_t> bytes);

/// Encoding is deterministic: no timestamps or text chunks are written.
void write_png(const std::filesystem::path& path, const Raster& img);
std::vector<std::uint8_t> encode_png(const Raster& img);

/// Masks are stored as 8-bit grayscale with bit 1 <-> 255.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
/// Any nonzero value decodes as bit 1.
Mask read_mask_png(const std::filesystem::path& path);

}  // namespace hybridaug
