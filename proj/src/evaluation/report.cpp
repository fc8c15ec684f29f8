#include "alphaclip/evaluation/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace alphaclip {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Table::render() const {
  std::vector<std::size_t> w(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], r[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < w.size(); ++c) {
      const std::string cell = c < cells.size() ? cells[c] : "";
      const std::string pad(w[c] - cell.size(), ' ');
      out += c == 0 ? cell + pad : "  " + pad + cell;
    }
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto x : w) total += x + 2;
  out += std::string(total > 2 ? total - 2 : 0, '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

void EvalReport::add(const std::string& key, double value) { fields.emplace_back(key, format_double(value)); }
void EvalReport::add(const std::string& key, const std::string& value) { fields.emplace_back(key, value); }

void EvalReport::add_metrics(const std::string& prefix, const ClassificationMetrics& m) {
  for (double v : {m.top1, m.top5, m.mean_per_class, m.mean_per_class_top5})
    if (!(v >= 0.0 && v <= 1.0)) throw NumericError("accuracy outside [0, 1] in " + prefix);
  add(prefix + ".top1", m.top1);
  add(prefix + ".top5", m.top5);
  add(prefix + ".mean_per_class", m.mean_per_class);
  add(prefix + ".mean_per_class_top5", m.mean_per_class_top5);
  add(prefix + ".samples", static_cast<double>(m.samples));
  if (!m.excluded_classes.empty()) {
    std::string ex;
    for (int c : m.excluded_classes) ex += (ex.empty() ? "" : ",") + std::to_string(c);
    add(prefix + ".excluded_classes", ex);
  }
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "[report]\n"
     << "command = " << command << "\n"
     << "config_hash = " << config_hash << "\n"
     << "seed = " << seed << "\n"
     << "checkpoint = " << checkpoint << "\n";
  for (const auto& [k, v] : fields) os << k << " = " << v << "\n";
  if (!table.header.empty()) {
    os << "\n";
    std::istringstream t(table.render());
    for (std::string l; std::getline(t, l);) os << "# " << l << "\n";
  }
  return os.str();
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

Table baseline_table(const std::vector<BaselineRow>& rows) {
  Table t;
  t.header = {"Method", "Top-1", "Top-5", "Mean/class"};
  for (const auto& r : rows)
    t.rows.push_back({r.method, format_percent(r.metrics.top1), format_percent(r.metrics.top5),
                      format_percent(r.metrics.mean_per_class)});
  return t;
}

void add_baselines(EvalReport& report, const std::vector<BaselineRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    report.add("row" + std::to_string(i) + ".method", rows[i].method);
    report.add_metrics("row" + std::to_string(i), rows[i].metrics);
  }
  report.table = baseline_table(rows);
}

RgbaImage render_attention(const AttentionMap& map, int head, int scale) {
  const Mat g = map.head_grid(head);
  const double peak = std::max(g.maxCoeff(), 1e-300);
  RgbaImage out(map.grid * scale, map.grid * scale);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const double v = std::clamp(g(y / scale, x / scale) / peak, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = v;
    }
  return out;
}

RgbaImage upscale(const RgbaImage& image, int scale) {
  RgbaImage out(image.height * scale, image.width * scale);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y / scale, x / scale, c);
      out.a(y, x) = image.a(y / scale, x / scale);
    }
  return out;
}

RgbaImage hstack(const std::vector<RgbaImage>& images, int gap) {
  int h = 0, w = 0;
  for (const auto& im : images) {
    h = std::max(h, im.height);
    w += im.width;
  }
  if (!images.empty()) w += gap * static_cast<int>(images.size() - 1);
  RgbaImage out(std::max(h, 1), std::max(w, 1), 1.0, 1.0);
  int ox = 0;
  for (const auto& im : images) {
    for (int y = 0; y < im.height; ++y)
      for (int x = 0; x < im.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, ox + x, c) = im.at(y, x, c);
    ox += im.width + gap;
  }
  return out;
}

}  // namespace alphaclip
