#include "alphaclip/datagen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "alphaclip/common.hpp"
#include "alphaclip/kv.hpp"

namespace alphaclip {

const char* shape_name(ShapeType s) {
  switch (s) {
    case ShapeType::Circle: return "circle";
    case ShapeType::Square: return "square";
    case ShapeType::Triangle: return "triangle";
  }
  return "?";
}

ShapeType parse_shape(const std::string& name) {
  if (name == "circle") return ShapeType::Circle;
  if (name == "square") return ShapeType::Square;
  if (name == "triangle") return ShapeType::Triangle;
  throw ConfigError("unknown shape '" + name + "'");
}

std::vector<NamedColor> default_palette() {
  return {
      {"red", {0.90, 0.12, 0.12}},    {"green", {0.15, 0.75, 0.20}},
      {"blue", {0.15, 0.25, 0.90}},   {"yellow", {0.95, 0.85, 0.15}},
      {"magenta", {0.85, 0.20, 0.85}}, {"cyan", {0.15, 0.85, 0.85}},
  };
}

void SceneSpec::validate() const {
  auto fail = [](const std::string& k, const std::string& why) { throw ConfigError(k + ": " + why); };
  if (canvas < 8) fail("canvas", "must be >= 8");
  if (min_shapes < 1) fail("min_shapes", "must be >= 1");
  if (max_shapes < min_shapes) fail("max_shapes", "must be >= min_shapes");
  if (shapes.empty()) fail("shapes", "at least one shape type required");
  if (static_cast<int>(palette.size()) < max_shapes) fail("palette", "needs at least max_shapes colors");
  std::set<std::string> names;
  std::set<std::array<double, 3>> values;
  for (const auto& c : palette) {
    if (!names.insert(c.name).second) fail("palette", "duplicate color name " + c.name);
    if (!values.insert(c.rgb).second) fail("palette", "duplicate color value for " + c.name);
    for (double v : c.rgb)
      if (v < 0.0 || v > 1.0) fail("palette", "channel outside [0,1] for " + c.name);
  }
  if (!(min_radius >= 1.0)) fail("min_radius", "must be >= 1");
  if (max_radius < min_radius) fail("max_radius", "must be >= min_radius");
  if (max_radius * 2.0 > canvas) fail("max_radius", "shape does not fit the canvas");
  if (min_visible < 0.0 || min_visible > 1.0) fail("min_visible", "must be in [0,1]");
  if (background_noise < 0.0) fail("background_noise", "must be >= 0");
  if (color_jitter < 0.0) fail("color_jitter", "must be >= 0");
  if (max_retries < 1) fail("max_retries", "must be >= 1");
  if (region_template.find("{color}") == std::string::npos || region_template.find("{shape}") == std::string::npos)
    fail("region_template", "must contain {color} and {shape}");
}

std::string SceneSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "canvas = " << canvas << "\n"
     << "min_shapes = " << min_shapes << "\n"
     << "max_shapes = " << max_shapes << "\n"
     << "shapes = ";
  for (std::size_t i = 0; i < shapes.size(); ++i) os << (i ? ", " : "") << shape_name(shapes[i]);
  os << "\npalette = ";
  for (std::size_t i = 0; i < palette.size(); ++i)
    os << (i ? ", " : "") << palette[i].name << " " << palette[i].rgb[0] << " " << palette[i].rgb[1] << " "
       << palette[i].rgb[2];
  os << "\noverlap = " << (overlap == OverlapPolicy::Allow ? "allow" : "forbid") << "\n"
     << "min_radius = " << min_radius << "\n"
     << "max_radius = " << max_radius << "\n"
     << "min_visible = " << min_visible << "\n"
     << "background_noise = " << background_noise << "\n"
     << "color_jitter = " << color_jitter << "\n"
     << "max_retries = " << max_retries << "\n"
     << "region_template = " << kv::quote_if_needed(region_template) << "\n";
  return os.str();
}

void SceneSpec::set(const kv::Entry& e) {
  const auto& k = e.key;
  if (k == "canvas") canvas = kv::to_int(e);
  else if (k == "min_shapes") min_shapes = kv::to_int(e);
  else if (k == "max_shapes") max_shapes = kv::to_int(e);
  else if (k == "shapes") {
    shapes.clear();
    for (const auto& n : kv::to_list(e)) {
      try {
        shapes.push_back(parse_shape(n));
      } catch (const ConfigError& err) {
        throw ConfigError("scene.shapes: " + std::string(err.what()));
      }
    }
  } else if (k == "palette") {
    palette.clear();
    for (const auto& item : kv::to_list(e)) {
      std::istringstream is(item);
      NamedColor c;
      if (!(is >> c.name >> c.rgb[0] >> c.rgb[1] >> c.rgb[2]))
        throw ConfigError("scene.palette: expected 'name r g b', got '" + item + "'");
      palette.push_back(c);
    }
  } else if (k == "overlap") {
    if (e.value == "allow") overlap = OverlapPolicy::Allow;
    else if (e.value == "forbid") overlap = OverlapPolicy::Forbid;
    else throw ConfigError("scene.overlap: expected allow or forbid");
  } else if (k == "min_radius") min_radius = kv::to_double(e);
  else if (k == "max_radius") max_radius = kv::to_double(e);
  else if (k == "min_visible") min_visible = kv::to_double(e);
  else if (k == "background_noise") background_noise = kv::to_double(e);
  else if (k == "color_jitter") color_jitter = kv::to_double(e);
  else if (k == "max_retries") max_retries = kv::to_int(e);
  else if (k == "region_template") region_template = e.value;
  else throw ConfigError("scene." + k + ": unknown key");
}

SceneSpec SceneSpec::from_text(const std::string& text) {
  SceneSpec s;
  for (const auto& e : kv::parse(text)) {
    if (!e.section.empty() && e.section != "scene") throw ConfigError("unexpected section [" + e.section + "]");
    s.set(e);
  }
  try {
    s.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("scene.") + err.what());
  }
  return s;
}

namespace {

constexpr double kSquareHalf = 0.88622692545275801;  // sqrt(pi)/2: equal area to the circle
const double kTriangleR = std::sqrt(4.0 * std::numbers::pi / (3.0 * std::sqrt(3.0)));

struct Extent {
  double left, right, up, down;
};

Extent shape_extent(ShapeType s, double r) {
  switch (s) {
    case ShapeType::Circle: return {r, r, r, r};
    case ShapeType::Square: return {kSquareHalf * r, kSquareHalf * r, kSquareHalf * r, kSquareHalf * r};
    case ShapeType::Triangle: {
      const double big = kTriangleR * r;
      const double half = big * std::sqrt(3.0) / 2.0;
      return {half, half, big, big / 2.0};
    }
  }
  return {r, r, r, r};
}

bool inside_triangle(double px, double py, double cx, double cy, double big) {
  // Upward equilateral triangle with centroid (cx, cy) and circumradius big.
  const double ax = cx, ay = cy - big;
  const double bx = cx - big * std::sqrt(3.0) / 2.0, by = cy + big / 2.0;
  const double qx = cx + big * std::sqrt(3.0) / 2.0, qy = cy + big / 2.0;
  auto edge = [](double x0, double y0, double x1, double y1, double x, double y) {
    return (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
  };
  const double e0 = edge(ax, ay, bx, by, px, py);
  const double e1 = edge(bx, by, qx, qy, px, py);
  const double e2 = edge(qx, qy, ax, ay, px, py);
  return (e0 <= 0 && e1 <= 0 && e2 <= 0) || (e0 >= 0 && e1 >= 0 && e2 >= 0);
}

}  // namespace

BinaryMask rasterize_shape(ShapeType shape, double cx, double cy, double r, int height, int width) {
  BinaryMask m(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool in = false;
      switch (shape) {
        case ShapeType::Circle: in = (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r; break;
        case ShapeType::Square:
          in = std::abs(px - cx) <= kSquareHalf * r && std::abs(py - cy) <= kSquareHalf * r;
          break;
        case ShapeType::Triangle: in = inside_triangle(px, py, cx, cy, kTriangleR * r); break;
      }
      m(y, x) = in ? 1 : 0;
    }
  return m;
}

double quantize8(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index) {
  Rng r = Rng::stream(base_seed, "scene");
  return r.next_u64() ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
}

std::string region_caption(const SceneSpec& spec, int color, ShapeType shape) {
  std::string out = spec.region_template;
  auto sub = [&](const std::string& key, const std::string& val) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + val.size()))
      out.replace(pos, key.size(), val);
  };
  sub("{color}", spec.palette.at(color).name);
  sub("{shape}", shape_name(shape));
  return out;
}

std::string whole_caption(const SceneSpec& spec, const std::vector<SceneRegion>& regions) {
  std::vector<const SceneRegion*> order;
  for (const auto& r : regions) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) {
    return a->color != b->color ? a->color < b->color : a->shape < b->shape;
  });
  std::string out = "a";
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0) out += (i + 1 == order.size()) ? " and" : ",";
    out += " " + spec.palette[order[i]->color].name + " " + shape_name(order[i]->shape);
  }
  return out;
}

std::vector<std::string> region_class_names(const SceneSpec& spec) {
  std::vector<std::string> out;
  for (const auto& c : spec.palette)
    for (auto s : spec.shapes) out.push_back(c.name + " " + shape_name(s));
  return out;
}

int region_class_index(const SceneSpec& spec, int color, ShapeType shape) {
  const auto it = std::find(spec.shapes.begin(), spec.shapes.end(), shape);
  if (it == spec.shapes.end()) throw InputError("shape not in scene spec");
  return color * static_cast<int>(spec.shapes.size()) + static_cast<int>(it - spec.shapes.begin());
}

std::vector<std::string> corpus_words(const SceneSpec& spec) {
  std::vector<std::string> w{"a", "an", "photo", "of", "the", "and", ",", "object", "shape", "on", "white"};
  for (const auto& c : spec.palette) w.push_back(c.name);
  for (auto s : {ShapeType::Circle, ShapeType::Square, ShapeType::Triangle}) w.push_back(shape_name(s));
  std::istringstream is(spec.region_template);
  std::string tok;
  while (is >> tok)
    if (tok != "{color}" && tok != "{shape}") w.push_back(tok);
  return w;
}

Scene generate_synthetic_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  Rng rng(seed);
  const int n = spec.canvas;
  Scene scene;
  scene.image = RgbaImage(n, n, 0.0, 1.0);

  // Background: desaturated random tint, a gentle gradient, per-pixel noise.
  std::array<double, 3> base{};
  const double gray = rng.uniform(0.3, 0.65);
  for (auto& b : base) b = 0.6 * gray + 0.4 * rng.uniform(0.25, 0.75);
  const double gx = rng.uniform(-0.1, 0.1), gy = rng.uniform(-0.1, 0.1);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c)
        scene.image.at(y, x, c) = base[c] + gx * (x / double(n) - 0.5) + gy * (y / double(n) - 0.5) +
                                  spec.background_noise * rng.normal();

  const int count = rng.uniform_int(spec.min_shapes, spec.max_shapes);
  std::vector<int> colors(spec.palette.size());
  for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = static_cast<int>(i);
  for (std::size_t i = colors.size() - 1; i > 0; --i)
    std::swap(colors[i], colors[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);

  std::vector<BinaryMask> footprints;
  std::vector<std::uint8_t> owner(static_cast<std::size_t>(n) * n, 0);

  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
      const ShapeType shape = spec.shapes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(spec.shapes.size()) - 1))];
      const double r = rng.uniform(spec.min_radius, spec.max_radius);
      const Extent e = shape_extent(shape, r);
      if (e.left + e.right > n || e.up + e.down > n) continue;
      const double cx = rng.uniform(e.left, n - e.right);
      const double cy = rng.uniform(e.up, n - e.down);
      BinaryMask fp = rasterize_shape(shape, cx, cy, r, n, n);
      if (fp.count() == 0) continue;

      std::vector<std::uint8_t> trial = owner;
      for (std::size_t i = 0; i < trial.size(); ++i)
        if (fp.bits[i]) trial[i] = static_cast<std::uint8_t>(k + 1);
      bool ok = true;
      if (spec.overlap == OverlapPolicy::Forbid) {
        for (std::size_t i = 0; i < owner.size() && ok; ++i) ok = !(fp.bits[i] && owner[i]);
      } else {
        for (int j = 0; j <= k && ok; ++j) {
          const BinaryMask& full = j < k ? footprints[j] : fp;
          std::size_t vis = 0;
          for (std::size_t i = 0; i < trial.size(); ++i) vis += trial[i] == j + 1;
          ok = static_cast<double>(vis) >= spec.min_visible * static_cast<double>(full.count()) && vis > 0;
        }
      }
      if (!ok) continue;

      owner = std::move(trial);
      footprints.push_back(std::move(fp));
      SceneRegion reg;
      reg.color = colors[k];
      reg.shape = shape;
      reg.cx = cx;
      reg.cy = cy;
      reg.radius = r;
      reg.caption = region_caption(spec, reg.color, shape);
      scene.regions.push_back(std::move(reg));
      placed = true;
    }
    if (!placed)
      throw GenerationError("could not place shape " + std::to_string(k + 1) + " of " + std::to_string(count) +
                            " within " + std::to_string(spec.max_retries) + " retries");
  }

  for (std::size_t j = 0; j < scene.regions.size(); ++j) {
    auto& reg = scene.regions[j];
    const auto& col = spec.palette[reg.color].rgb;
    std::array<double, 3> tint{};
    for (int c = 0; c < 3; ++c) tint[c] = col[c] + spec.color_jitter * rng.uniform(-1.0, 1.0);
    reg.mask = BinaryMask(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const auto i = static_cast<std::size_t>(y) * n + x;
        if (owner[i] != j + 1) continue;
        reg.mask(y, x) = 1;
        for (int c = 0; c < 3; ++c) scene.image.at(y, x, c) = tint[c] + 0.5 * spec.background_noise * rng.normal();
      }
    reg.box = bounding_box(reg.mask);
  }
  for (auto& v : scene.image.rgb) v = quantize8(v);
  scene.whole_caption = whole_caption(spec, scene.regions);
  return scene;
}

}  // namespace alphaclip
