#pragma once

#include <filesystem>

#include "confix/image.hpp"

namespace confix {

/// 8-bit PNG (gray or RGB). Values are clamped to [0,1] and rounded.
void write_png(const ImageBuffer& img, const std::filesystem::path& path);
/// Reads an 8-bit PNG into [0,1]; gray+alpha and RGBA inputs drop alpha.
ImageBuffer read_png(const std::filesystem::path& path);

/// 16-bit binary PGM of a single-channel image, storing round(v / scale * 65535).
/// The scale is recorded in a "# scale <value>" header comment.
void write_pgm16(const ImageBuffer& img, double scale, const std::filesystem::path& path);
/// Returns the stored field multiplied back by the recorded scale (1 if absent).
ImageBuffer read_pgm16(const std::filesystem::path& path);

/// Raw float32 sidecar: 16-byte header {"CFXF", width u32, height u32,
/// channels u32} followed by little-endian float32 data in image order.
void write_cfxf(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_cfxf(const std::filesystem::path& path);

}  // namespace confix
