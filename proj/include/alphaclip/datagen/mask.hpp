#pragma once

#include "alphaclip/encoder/image.hpp"

namespace alphaclip {

// Max over non-overlapping P x P windows. Throws InputError when a cell is
// not 0/1 or when the size is not a multiple of P.
PooledMask pool_mask(const BinaryMask& mask, int patch);

// Threshold-free conversion of an alpha plane; every value must be 0 or 1.
BinaryMask mask_from_alpha(const RgbaImage& image);

BinaryMask box_mask(const Box& box, int height, int width);

// Square-neighbourhood (Chebyshev) dilation by margin pixels.
BinaryMask dilate(const BinaryMask& mask, int margin);

bool contained_in(const BinaryMask& inner, const BinaryMask& outer);

}  // namespace alphaclip
