#include "alphaclip/datagen/mask.hpp"

#include <algorithm>
#include <string>

#include "alphaclip/common.hpp"

namespace alphaclip {

PooledMask pool_mask(const BinaryMask& mask, int patch) {
  if (patch <= 0) throw InputError("patch size must be positive");
  if (mask.bits.size() != static_cast<std::size_t>(mask.height) * mask.width)
    throw ShapeError("mask storage does not match its dimensions");
  if (mask.height % patch != 0 || mask.width % patch != 0)
    throw InputError("mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                     " is not divisible by patch " + std::to_string(patch));
  for (auto b : mask.bits)
    if (b > 1) throw InputError("mask is not binary (value " + std::to_string(int(b)) + ")");
  PooledMask m;
  m.rows = mask.height / patch;
  m.cols = mask.width / patch;
  m.cells.assign(static_cast<std::size_t>(m.rows) * m.cols, 0);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask(y, x)) m.cells[static_cast<std::size_t>(y / patch) * m.cols + x / patch] = 1;
  return m;
}

BinaryMask mask_from_alpha(const RgbaImage& image) {
  BinaryMask m(image.height, image.width);
  for (std::size_t i = 0; i < image.alpha.size(); ++i) {
    const double a = image.alpha[i];
    if (a != 0.0 && a != 1.0) throw InputError("alpha plane is not binary");
    m.bits[i] = a == 1.0;
  }
  return m;
}

BinaryMask box_mask(const Box& box, int height, int width) {
  if (!box.valid_in(height, width)) throw InputError("box outside image or zero area");
  BinaryMask m(height, width);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) m(y, x) = 1;
  return m;
}

BinaryMask dilate(const BinaryMask& mask, int margin) {
  if (margin <= 0) return mask;
  BinaryMask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask(y, x)) continue;
      for (int yy = std::max(0, y - margin); yy <= std::min(mask.height - 1, y + margin); ++yy)
        for (int xx = std::max(0, x - margin); xx <= std::min(mask.width - 1, x + margin); ++xx)
          out(yy, xx) = 1;
    }
  return out;
}

bool contained_in(const BinaryMask& inner, const BinaryMask& outer) {
  if (inner.height != outer.height || inner.width != outer.width) return false;
  for (std::size_t i = 0; i < inner.bits.size(); ++i)
    if (inner.bits[i] && !outer.bits[i]) return false;
  return true;
}

}  // namespace alphaclip
