#include <doctest.h>

#include <filesystem>

#include "alphaclip/cli/run.hpp"
#include "alphaclip/io.hpp"
#include "helpers.hpp"

using namespace alphaclip;
using namespace alphaclip::cli;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"([run]
seed = 7
[arch]
image_size = 16
patch = 4
width = 8
layers = 2
heads = 2
mlp_ratio = 2
embed_dim = 6
text_width = 8
text_layers = 1
text_heads = 2
context_length = 12
[scene]
canvas = 16
min_radius = 3
max_radius = 4
max_shapes = 3
[train]
total_steps = 6
batch = 6
lr_alpha = 1e-2
lr_rest = 1e-3
[data]
train_scenes = 12
eval_scenes = 6
)";

RunConfig tiny(const fs::path& out) {
  RunConfig c = parse_config(kTiny);
  c.paths.out = out.string();
  return c;
}

int run_argv(std::vector<std::string> args) {
  args.insert(args.begin(), "alphaclip");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config parsing") {
  CHECK(parse_config("") == RunConfig{});

  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("[train]\nr_s = 1.5\n").find("train.r_s") != std::string::npos);
  CHECK(message("[train]\nbogus = 1\n").find("train.bogus") != std::string::npos);
  CHECK(message("[nope]\nx = 1\n").find("nope") != std::string::npos);
  CHECK(message("[arch]\nwidth = abc\n").find("arch.width") != std::string::npos);
  CHECK(message("[train]\nseed = 3\n").find("train.seed") != std::string::npos);
  CHECK(message("[eval]\ntemplates = a thing\n").find("eval.templates") != std::string::npos);
  CHECK(message("[scene]\nshapes = hexagon\n").find("scene.shapes") != std::string::npos);

  const RunConfig c = parse_config(kTiny);
  CHECK(c.seed == 7);
  CHECK(c.arch.image_size == 16);
  CHECK(c.train.total_steps == 6);
  CHECK(parse_config(serialize_config(c)) == c);

  RunConfig o = c;
  apply_override(o, "train.r_s", "0.5");
  CHECK(o.train.r_s == 0.5);
  CHECK(config_hash(o, "train") != config_hash(c, "train"));
  CHECK(config_hash(c, "train") != config_hash(c, "eval-cls"));
  CHECK(config_hash(c, "train") == config_hash(parse_config(serialize_config(c)), "train"));
  CHECK_THROWS_AS(apply_override(o, "r_s", "0.5"), ConfigError);
  CHECK_THROWS_AS(apply_override(o, "train.", "0.5"), ConfigError);
}

TEST_CASE("dispatch") {
  testutil::TempDir tmp("cli");
  const RunConfig base = tiny(tmp.path);

  SUBCASE("unknown command") { CHECK(dispatch("frobnicate", base).exit_code == kUsage); }

  SUBCASE("missing inputs fail before a run directory exists") {
    RunConfig c = base;
    c.paths.checkpoint = (tmp.path / "missing.ck").string();
    const auto r = dispatch("eval-cls", c);
    CHECK(r.exit_code == kInput);
    CHECK(fs::is_empty(tmp.path));
    RunConfig d = base;
    d.paths.data = (tmp.path / "nodata").string();
    CHECK(dispatch("train", d).exit_code == kInput);
    CHECK(fs::is_empty(tmp.path));
  }

  SUBCASE("invalid config") {
    RunConfig c = base;
    c.train.r_s = -1;
    CHECK(dispatch("train", c).exit_code == kConfig);
  }

  SUBCASE("gen-data is byte-reproducible") {
    const auto a = dispatch("gen-data", base);
    REQUIRE(a.exit_code == kOk);
    const auto first = io::read_file(a.run_dir / "region.shard");
    const auto whole = io::read_file(a.run_dir / "whole.shard");
    fs::remove_all(a.run_dir);
    const auto b = dispatch("gen-data", base);
    REQUIRE(b.exit_code == kOk);
    CHECK(b.run_dir == a.run_dir);
    CHECK(io::read_file(b.run_dir / "region.shard") == first);
    CHECK(io::read_file(b.run_dir / "whole.shard") == whole);
    const std::string manifest = io::read_file(b.run_dir / "manifest.txt");
    CHECK(manifest.find("status = complete") != std::string::npos);
    const RunConfig recorded = parse_config(io::read_file(b.run_dir / "config.txt"));
    CHECK(recorded.seed == 7);
    CHECK(manifest.find("config_hash = " + config_hash(recorded, "gen-data")) != std::string::npos);
    CHECK(b.run_dir.filename() == "gen-data-" + config_hash(recorded, "gen-data"));
  }

  SUBCASE("train then evaluate, twice, bit-identically") {
    std::string reports[2];
    for (int rep = 0; rep < 2; ++rep) {
      RunConfig c = base;
      c.paths.out = (tmp.path / std::to_string(rep)).string();
      const auto t = dispatch("train", c);
      REQUIRE(t.exit_code == kOk);
      CHECK(fs::exists(t.run_dir / "checkpoint.ck"));
      CHECK(fs::exists(t.run_dir / "loss_log.txt"));
      c.paths.checkpoint = (t.run_dir / "params.ck").string();
      const auto e = dispatch("eval-cls", c);
      REQUIRE(e.exit_code == kOk);
      reports[rep] = io::read_file(e.run_dir / "report.txt");
      CHECK(reports[rep].find("mask.top1 = ") != std::string::npos);

      c.paths.base = c.paths.checkpoint;
      CHECK(dispatch("eval-rec", c).exit_code == kOk);
      CHECK(dispatch("viz-attn", c).exit_code == kOk);

      if (rep == 0) {
        RunConfig r = base;
        r.paths.out = c.paths.out;
        r.paths.resume = (t.run_dir / "checkpoint.ck").string();
        r.train.r_s = 0.5;
        CHECK(dispatch("train", r).exit_code == kConfig);
      }
    }
    const auto strip = [](const std::string& s) { return s.substr(s.find("\neval.scenes")); };
    CHECK(strip(reports[0]) == strip(reports[1]));
  }
}

TEST_CASE("command line") {
  testutil::TempDir tmp("argv");
  const fs::path cfg = tmp.path / "c.txt";
  io::write_file_atomic(cfg, kTiny);
  const std::string out = "--paths.out=" + (tmp.path / "runs").string();
  CHECK(run_argv({}) == kUsage);
  CHECK(run_argv({"gen-data", "--config", cfg.string(), "--nope.key", "1", out}) == kConfig);
  CHECK(run_argv({"eval-cls", "--config", cfg.string(), out, "--paths.checkpoint", "/nonexistent.ck"}) == kInput);
  CHECK(run_argv({"gen-data", "--config", cfg.string(), out, "--data.train_scenes", "3"}) == kOk);
  CHECK(run_argv({"gen-data", "--config", (tmp.path / "absent.txt").string()}) == kConfig);
}
