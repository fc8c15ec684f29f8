#include "alphaclip/encoder/image.hpp"

#include <algorithm>
#include <string>

#include "alphaclip/common.hpp"

namespace alphaclip {

void validate(const RgbaImage& image) {
  if (image.height <= 0 || image.width <= 0) throw ShapeError("image has non-positive size");
  const auto px = static_cast<std::size_t>(image.height) * image.width;
  if (image.rgb.size() != px * 3) throw ShapeError("rgb plane size does not match image dimensions");
  if (image.alpha.size() != px) throw ShapeError("alpha plane size does not match image dimensions");
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!std::all_of(image.rgb.begin(), image.rgb.end(), in_range))
    throw InputError("rgb value outside [0,1]");
  if (!std::all_of(image.alpha.begin(), image.alpha.end(), in_range))
    throw InputError("alpha value outside [0,1]");
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

bool PooledMask::all_ones() const {
  return std::all_of(cells.begin(), cells.end(), [](auto c) { return c == 1; });
}

bool PooledMask::all_zero() const {
  return std::all_of(cells.begin(), cells.end(), [](auto c) { return c == 0; });
}

Box bounding_box(const BinaryMask& mask) {
  Box b{mask.width, mask.height, 0, 0};
  bool any = false;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask(y, x)) {
        any = true;
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
  return any ? b : Box{};
}

RgbaImage with_alpha(RgbaImage image, const BinaryMask& mask) {
  if (mask.height != image.height || mask.width != image.width)
    throw ShapeError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                     " does not match image " + std::to_string(image.height) + "x" +
                     std::to_string(image.width));
  for (std::size_t i = 0; i < image.alpha.size(); ++i) image.alpha[i] = mask.bits[i] ? 1.0 : 0.0;
  return image;
}

RgbaImage with_full_alpha(RgbaImage image) {
  std::fill(image.alpha.begin(), image.alpha.end(), 1.0);
  return image;
}

}  // namespace alphaclip
