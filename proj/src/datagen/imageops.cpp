#include "alphaclip/datagen/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "alphaclip/common.hpp"
#include "alphaclip/io.hpp"

namespace alphaclip {

RgbaImage crop(const RgbaImage& image, const Box& box) {
  if (!box.valid_in(image.height, image.width)) throw InputError("crop box outside image or zero area");
  RgbaImage out(box.height(), box.width());
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(box.y0 + y, box.x0 + x, c);
      out.a(y, x) = image.a(box.y0 + y, box.x0 + x);
    }
  return out;
}

Box enlarge_box(const Box& box, double factor, int height, int width) {
  if (factor < 1.0) throw InputError("enlarge factor must be >= 1");
  const double cx = 0.5 * (box.x0 + box.x1), cy = 0.5 * (box.y0 + box.y1);
  const double hw = 0.5 * box.width() * factor, hh = 0.5 * box.height() * factor;
  Box b;
  b.x0 = std::max(0, static_cast<int>(std::floor(cx - hw)));
  b.y0 = std::max(0, static_cast<int>(std::floor(cy - hh)));
  b.x1 = std::min(width, static_cast<int>(std::ceil(cx + hw)));
  b.y1 = std::min(height, static_cast<int>(std::ceil(cy + hh)));
  return b;
}

RgbaImage pad_to_square(const RgbaImage& image, const Rgb& fill, double fill_alpha) {
  const int side = std::max(image.height, image.width);
  RgbaImage out(side, side, 0.0, fill_alpha);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = fill[c];
  const int oy = (side - image.height) / 2, ox = (side - image.width) / 2;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(oy + y, ox + x, c) = image.at(y, x, c);
      out.a(oy + y, ox + x) = image.a(y, x);
    }
  return out;
}

RgbaImage resize(const RgbaImage& image, int height, int width) {
  if (height <= 0 || width <= 0) throw InputError("resize target must be positive");
  RgbaImage out(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    const int ny = std::min(image.height - 1, static_cast<int>((y + 0.5) * sy));
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bot = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = std::clamp((1 - wy) * top + wy * bot, 0.0, 1.0);
      }
      const int nx = std::min(image.width - 1, static_cast<int>((x + 0.5) * sx));
      out.a(y, x) = image.a(ny, nx);
    }
  }
  return out;
}

RgbaImage gaussian_blur(const RgbaImage& image, double sigma) {
  if (!(sigma > 0.0)) throw InputError("blur sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;

  const int h = image.height, w = image.width;
  RgbaImage tmp = image, out = image;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * image.at(y, std::clamp(x + i, 0, w - 1), c);
        tmp.at(y, x, c) = s;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
        out.at(y, x, c) = std::clamp(s, 0.0, 1.0);
      }
  return out;
}

RgbaImage grayscale(const RgbaImage& image) {
  RgbaImage out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      double l = 0.0;
      for (int c = 0; c < 3; ++c) l += kLumaWeights[c] * image.at(y, x, c);
      l = std::clamp(l, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = l;
    }
  return out;
}

RgbaImage composite_on(const RgbaImage& image, const BinaryMask& mask, const Rgb& fill) {
  if (mask.height != image.height || mask.width != image.width) throw ShapeError("mask does not match image");
  RgbaImage out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (!mask(y, x))
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = fill[c];
  return out;
}

Rgb mean_color(const RgbaImage& image) {
  Rgb m{};
  const auto px = static_cast<double>(image.height) * image.width;
  for (std::size_t i = 0; i < image.rgb.size(); ++i) m[i % 3] += image.rgb[i];
  for (auto& v : m) v /= px;
  return m;
}

void write_ppm(const std::filesystem::path& path, const RgbaImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  for (double v : image.rgb) out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  io::write_file_atomic(path, out);
}

RgbaImage read_ppm(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  std::istringstream is(bytes);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  is >> magic >> w >> h >> maxv;
  if (magic != "P6" || w <= 0 || h <= 0 || maxv != 255) throw InputError("unsupported pixmap " + path.string());
  is.get();
  const auto offset = static_cast<std::size_t>(is.tellg());
  const auto n = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < offset + n) throw CorruptionError("truncated pixmap " + path.string());
  RgbaImage img(h, w);
  for (std::size_t i = 0; i < n; ++i) img.rgb[i] = static_cast<unsigned char>(bytes[offset + i]) / 255.0;
  return img;
}

}  // namespace alphaclip
