#pragma once

#include <array>
#include <filesystem>

#include "alphaclip/encoder/image.hpp"

namespace alphaclip {

using Rgb = std::array<double, 3>;

RgbaImage crop(const RgbaImage& image, const Box& box);

// Scales the box by factor about its centre, then intersects with the image.
Box enlarge_box(const Box& box, double factor, int height, int width);

// Centres the image on a square canvas of side max(h, w).
RgbaImage pad_to_square(const RgbaImage& image, const Rgb& fill, double fill_alpha);

// Bilinear RGB (pixel centres, edge clamp). Alpha is resampled nearest so
// binary maps stay binary.
RgbaImage resize(const RgbaImage& image, int height, int width);

// Separable Gaussian over RGB with edge clamp; alpha untouched.
RgbaImage gaussian_blur(const RgbaImage& image, double sigma);

// Luminance 0.299 R + 0.587 G + 0.114 B replicated on all channels.
inline constexpr Rgb kLumaWeights{0.299, 0.587, 0.114};
RgbaImage grayscale(const RgbaImage& image);

// Pixels with mask 0 take the fill colour.
RgbaImage composite_on(const RgbaImage& image, const BinaryMask& mask, const Rgb& fill);

Rgb mean_color(const RgbaImage& image);

// Binary P6 pixmap (RGB only).
void write_ppm(const std::filesystem::path& path, const RgbaImage& image);
RgbaImage read_ppm(const std::filesystem::path& path);

}  // namespace alphaclip
