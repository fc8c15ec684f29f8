#include <sstream>

#include "alphaclip/cli/run.hpp"
#include "alphaclip/evaluation/report.hpp"

namespace alphaclip::cli {

namespace {

void set_run(RunConfig& c, const kv::Entry& e) {
  if (e.key == "seed") c.seed = kv::to_u64(e);
  else throw ConfigError("run." + e.key + ": unknown key");
}

void set_data(DataConfig& d, const kv::Entry& e) {
  if (e.key == "train_scenes") d.train_scenes = kv::to_int(e);
  else if (e.key == "eval_scenes") d.eval_scenes = kv::to_int(e);
  else if (e.key == "eval_min_shapes") d.eval_min_shapes = kv::to_int(e);
  else throw ConfigError("data." + e.key + ": unknown key");
}

void set_eval(EvalConfig& v, const kv::Entry& e) {
  if (e.key == "templates") v.templates = kv::to_list(e);
  else if (e.key == "viz_scene") v.viz_scene = kv::to_int(e);
  else if (e.key == "viz_region") v.viz_region = kv::to_int(e);
  else if (e.key == "viz_scale") v.viz_scale = kv::to_int(e);
  else if (e.key == "red_circle_stroke") v.red_circle_stroke = kv::to_double(e);
  else if (e.key == "red_circle_enlarge") v.red_circle_enlarge = kv::to_double(e);
  else throw ConfigError("eval." + e.key + ": unknown key");
}

void set_paths(PathConfig& p, const kv::Entry& e) {
  if (e.key == "out") p.out = e.value;
  else if (e.key == "data") p.data = e.value;
  else if (e.key == "init") p.init = e.value;
  else if (e.key == "resume") p.resume = e.value;
  else if (e.key == "checkpoint") p.checkpoint = e.value;
  else if (e.key == "base") p.base = e.value;
  else throw ConfigError("paths." + e.key + ": unknown key");
}

void apply(RunConfig& c, const kv::Entry& e) {
  const auto& s = e.section;
  if (s == "run") set_run(c, e);
  else if (s == "arch") c.arch.set(e);
  else if (s == "scene") c.scene.set(e);
  else if (s == "train") {
    if (e.key == "seed") throw ConfigError("train.seed: set [run] seed instead; every stream derives from it");
    c.train.set(e);
  } else if (s == "preprocess") c.preprocess.set(e);
  else if (s == "data") set_data(c.data, e);
  else if (s == "eval") set_eval(c.eval, e);
  else if (s == "paths") set_paths(c.paths, e);
  else if (s.empty()) throw ConfigError(e.key + ": key outside any section");
  else throw ConfigError("[" + s + "]: unknown section");
}

template <class F>
void prefixed(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(section + ".", 0) == 0) throw;
    throw ConfigError(section + "." + msg);
  }
}

}  // namespace

void validate(const RunConfig& c) {
  prefixed("arch", [&] { c.arch.validate(); });
  prefixed("scene", [&] { c.scene.validate(); });
  prefixed("train", [&] { c.train.validate(c.arch.layers); });
  prefixed("preprocess", [&] { c.preprocess.validate(); });
  if (c.data.train_scenes < 1) throw ConfigError("data.train_scenes: must be >= 1");
  if (c.data.eval_scenes < 1) throw ConfigError("data.eval_scenes: must be >= 1");
  if (c.data.eval_min_shapes < 1 || c.data.eval_min_shapes > c.scene.max_shapes)
    throw ConfigError("data.eval_min_shapes: must lie in [1, scene.max_shapes]");
  if (c.eval.templates.empty()) throw ConfigError("eval.templates: at least one template required");
  for (const auto& t : c.eval.templates)
    if (t.find("{name}") == std::string::npos) throw ConfigError("eval.templates: '" + t + "' lacks {name}");
  if (c.eval.viz_scene < 0) throw ConfigError("eval.viz_scene: must be >= 0");
  if (c.eval.viz_region < 0) throw ConfigError("eval.viz_region: must be >= 0");
  if (c.eval.viz_scale < 1) throw ConfigError("eval.viz_scale: must be >= 1");
  if (!(c.eval.red_circle_stroke > 0.0)) throw ConfigError("eval.red_circle_stroke: must be positive");
  if (!(c.eval.red_circle_enlarge >= 1.0)) throw ConfigError("eval.red_circle_enlarge: must be >= 1");
  if (c.paths.out.empty()) throw ConfigError("paths.out: must not be empty");
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  for (const auto& e : kv::parse(text)) apply(c, e);
  validate(c);
  return c;
}

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted_key.size())
    throw ConfigError(dotted_key + ": overrides take the form section.key");
  kv::Entry e{dotted_key.substr(0, dot), dotted_key.substr(dot + 1), value, 0};
  apply(cfg, e);
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  auto section = [&](const char* name, const std::string& body) { os << "[" << name << "]\n" << body << "\n"; };
  section("run", "seed = " + std::to_string(c.seed) + "\n");
  section("arch", c.arch.to_text());
  section("scene", c.scene.to_text());
  std::string train;
  std::istringstream tr(c.train.to_text());
  for (std::string l; std::getline(tr, l);)
    if (l.rfind("seed =", 0) != 0) train += l + "\n";
  section("train", train);
  section("preprocess", c.preprocess.to_text());
  section("data", "train_scenes = " + std::to_string(c.data.train_scenes) + "\n" +
                      "eval_scenes = " + std::to_string(c.data.eval_scenes) + "\n" +
                      "eval_min_shapes = " + std::to_string(c.data.eval_min_shapes) + "\n");
  std::string templates;
  for (std::size_t i = 0; i < c.eval.templates.size(); ++i) templates += (i ? ", " : "") + c.eval.templates[i];
  section("eval", "templates = " + kv::quote_if_needed(templates) + "\n" +
                      "viz_scene = " + std::to_string(c.eval.viz_scene) + "\n" +
                      "viz_region = " + std::to_string(c.eval.viz_region) + "\n" +
                      "viz_scale = " + std::to_string(c.eval.viz_scale) + "\n" +
                      "red_circle_stroke = " + format_double(c.eval.red_circle_stroke) + "\n" +
                      "red_circle_enlarge = " + format_double(c.eval.red_circle_enlarge) + "\n");
  section("paths", "out = " + kv::quote_if_needed(c.paths.out) + "\n" + "data = " + kv::quote_if_needed(c.paths.data) +
                       "\n" + "init = " + kv::quote_if_needed(c.paths.init) + "\n" +
                       "resume = " + kv::quote_if_needed(c.paths.resume) + "\n" +
                       "checkpoint = " + kv::quote_if_needed(c.paths.checkpoint) + "\n" +
                       "base = " + kv::quote_if_needed(c.paths.base) + "\n");
  return os.str();
}

std::string config_hash(const RunConfig& cfg, const std::string& command) {
  Fnv1a64 h;
  h.update(command);
  h.update(std::string_view("\n"));
  h.update(serialize_config(cfg));
  return hex64(h.digest());
}

std::string RunManifest::to_text() const {
  std::ostringstream os;
  os << "[manifest]\n"
     << "status = " << status << "\n"
     << "command = " << command << "\n"
     << "config_hash = " << config_hash << "\n"
     << "seed = " << seed << "\n"
     << "format.checkpoint = 1\n"
     << "format.shard = 1\n";
  os << "\n[artifacts]\n";
  for (const auto& [k, v] : artifacts) os << k << " = " << kv::quote_if_needed(v) << "\n";
  os << "\n[timings]\n";
  for (const auto& [k, v] : timings) os << k << "_seconds = " << format_double(v) << "\n";
  return os.str();
}

}  // namespace alphaclip::cli
