#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "painscope/tensor.hpp"

namespace painscope {

/// Interleaved 8-bit raster as stored on disk.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Decodes PNG (8-bit gray / gray+alpha / RGB / RGBA) or binary/ASCII PGM/PPM.
/// Alpha is dropped. Throws IoError / FormatError.
Image8 read_image(const std::string& path);

/// Writes an 8-bit gray or RGB PNG.
void write_png(const Image8& image, const std::string& path);
void write_pnm(const Image8& image, const std::string& path);

/// Bilinear resampling of one [H,W] plane with half-pixel centers.
std::vector<double> resize_plane(const std::vector<double>& plane, int height, int width,
                                 int out_height, int out_width);

/// [C,H,W] -> [C,out,out] bilinear.
Tensor resize_image(const Tensor& image, int out_size);

/// Converts a raster to a [channels,size,size] tensor in [0,1]. Gray is
/// replicated to RGB; RGB is averaged to gray.
Tensor to_tensor(const Image8& image, int channels, int size);

/// [C,H,W] in [0,1] -> raster, values rounded to the nearest 8-bit level.
Image8 from_tensor(const Tensor& image);

} // namespace painscope
