#pragma once

#include <filesystem>
#include <vector>

#include "crashbench/core.hpp"

namespace crashbench {

/// Bilinear resample with the half-pixel center convention:
///   src = (dst + 0.5) * (src_size / dst_size) - 0.5
/// Sample coordinates clamp to the edges. Interpolation is computed as
/// nested lerps, so constant inputs reproduce bit-exactly and same-size
/// resizes are the identity. Both the frame preprocessor and the heatmap
/// upsampler go through this one function.
void bilinear_resize(const float* src, int src_h, int src_w, int channels,
                     float* dst, int dst_h, int dst_w);

/// Binary PPM (P6), 8-bit, RGB.
RawFrame read_ppm(const std::filesystem::path& path);
void write_ppm(const RawFrame& frame, const std::filesystem::path& path);

/// Binary PGM (P5), 8-bit, grayscale. Values are round(v * 255).
void write_pgm(const std::vector<float>& values, int h, int w,
               const std::filesystem::path& path);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int* h,
                                   int* w);

}  // namespace crashbench
