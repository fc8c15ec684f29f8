#pragma once

#include <cstdint>
#include <vector>

namespace alphaclip {

// H x W image with interleaved RGB and a separate focus (alpha) plane.
// All values live in [0, 1]; alpha 1 marks the region of interest.
struct RgbaImage {
  int height = 0;
  int width = 0;
  std::vector<double> rgb;    // height * width * 3, row-major HWC
  std::vector<double> alpha;  // height * width

  RgbaImage() = default;
  RgbaImage(int h, int w, double fill_rgb = 0.0, double fill_alpha = 1.0)
      : height(h),
        width(w),
        rgb(static_cast<std::size_t>(h) * w * 3, fill_rgb),
        alpha(static_cast<std::size_t>(h) * w, fill_alpha) {}

  double& at(int y, int x, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double& a(int y, int x) { return alpha[static_cast<std::size_t>(y) * width + x]; }
  double a(int y, int x) const { return alpha[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const RgbaImage&) const = default;
};

// Throws InputError when channels are out of [0, 1] or sizes disagree.
void validate(const RgbaImage& image);

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& operator()(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t operator()(int y, int x) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

// Feature-grid mask: one cell per P x P patch, 1 = foreground.
struct PooledMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;

  std::uint8_t operator()(int i, int j) const {
    return cells[static_cast<std::size_t>(i) * cols + j];
  }
  bool all_ones() const;
  bool all_zero() const;
  bool operator==(const PooledMask&) const = default;
};

// Half-open pixel box [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool valid_in(int h, int w) const { return 0 <= x0 && x0 < x1 && x1 <= w && 0 <= y0 && y0 < y1 && y1 <= h; }
  bool operator==(const Box&) const = default;
};

// Tight bounding box of the 1-pixels; nullopt-like empty box (all zero) if none.
Box bounding_box(const BinaryMask& mask);

RgbaImage with_alpha(RgbaImage image, const BinaryMask& mask);
RgbaImage with_full_alpha(RgbaImage image);

}  // namespace alphaclip
