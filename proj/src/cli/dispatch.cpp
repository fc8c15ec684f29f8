#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <iostream>

#include "alphaclip/cli/run.hpp"
#include "alphaclip/datagen/pipelines.hpp"
#include "alphaclip/encoder/checkpoint.hpp"
#include "alphaclip/evaluation/report.hpp"
#include "alphaclip/io.hpp"

namespace alphaclip::cli {

namespace fs = std::filesystem;

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"gen-data", "train", "eval-cls", "eval-rec", "eval-baselines", "viz-attn",
                                          "grad-check"};
  return c;
}

namespace {

struct Context {
  RunConfig cfg;
  std::string command;
  Vocabulary vocab;
  fs::path dir;
  RunManifest manifest;

  void artifact(const std::string& key, const fs::path& p) { manifest.artifacts.emplace_back(key, p.string()); }
  void write_manifest() const { io::write_file_atomic(dir / "manifest.txt", manifest.to_text()); }
};

void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw InputError("paths." + key + " is required for this command");
  if (!fs::is_regular_file(path)) throw InputError("paths." + key + ": no such file " + path);
}

void preflight(const std::string& command, const RunConfig& c) {
  if (!c.paths.data.empty()) {
    for (const char* f : {"region.shard", "whole.shard"})
      if (!fs::is_regular_file(fs::path(c.paths.data) / f))
        throw InputError("paths.data: " + (fs::path(c.paths.data) / f).string() + " is missing");
  }
  if (command == "train") {
    if (!c.paths.init.empty()) require_file("init", c.paths.init);
    if (!c.paths.resume.empty()) require_file("resume", c.paths.resume);
  }
  if (command == "eval-cls" || command == "eval-rec" || command == "viz-attn" || command == "eval-baselines")
    require_file("checkpoint", c.paths.checkpoint);
  if (command == "eval-baselines") require_file("base", c.paths.base);
  if (command == "eval-rec" && !c.paths.base.empty()) require_file("base", c.paths.base);
}

std::uint64_t eval_seed(const RunConfig& c) { return Rng::stream(c.seed, "eval").next_u64(); }

RegionEvalSet eval_set(const RunConfig& c) {
  SceneSpec spec = c.scene;
  spec.min_shapes = c.data.eval_min_shapes;
  return make_region_eval_set(eval_seed(c), c.data.eval_scenes, spec);
}

SyntheticCorpus load_corpus(const Context& ctx) {
  if (!ctx.cfg.paths.data.empty()) {
    SyntheticCorpus c;
    c.region = shard_read(fs::path(ctx.cfg.paths.data) / "region.shard");
    c.whole = shard_read(fs::path(ctx.cfg.paths.data) / "whole.shard");
    return c;
  }
  return build_synthetic_corpus(ctx.cfg.seed, ctx.cfg.data.train_scenes, ctx.cfg.scene, ctx.vocab,
                                ctx.cfg.arch.context_length);
}

EvalReport new_report(const Context& ctx) {
  EvalReport r;
  r.command = ctx.command;
  r.config_hash = ctx.manifest.config_hash;
  r.seed = ctx.cfg.seed;
  r.checkpoint = ctx.cfg.paths.checkpoint;
  return r;
}

void write_report(Context& ctx, const EvalReport& r) {
  const std::string text = r.to_text();
  io::write_file_atomic(ctx.dir / "report.txt", text);
  ctx.artifact("report", ctx.dir / "report.txt");
  std::cout << text;
}

void cmd_gen_data(Context& ctx) {
  const SyntheticCorpus c = build_synthetic_corpus(ctx.cfg.seed, ctx.cfg.data.train_scenes, ctx.cfg.scene, ctx.vocab,
                                                   ctx.cfg.arch.context_length);
  for (const auto& s : c.skipped) std::cerr << "skipped scene " << s.index << ": " << s.reason << "\n";
  shard_write(c.region, ctx.dir / "region.shard");
  shard_write(c.whole, ctx.dir / "whole.shard");
  ctx.artifact("region_shard", ctx.dir / "region.shard");
  ctx.artifact("whole_shard", ctx.dir / "whole.shard");
  std::cout << "region samples " << c.region.size() << ", whole-image samples " << c.whole.size() << ", skipped "
            << c.skipped.size() << "\n";
}

void cmd_train(Context& ctx) {
  const SyntheticCorpus corpus = load_corpus(ctx);
  TrainConfig tc = ctx.cfg.train;
  tc.seed = ctx.cfg.seed;
  TrainState state;
  if (!ctx.cfg.paths.resume.empty()) {
    LoadedCheckpoint ck = checkpoint_load(ctx.cfg.paths.resume, ctx.cfg.arch);
    if (!(ck.config == tc)) throw ConfigError("paths.resume: checkpoint was written under a different [train] config");
    state = std::move(ck.state);
  } else {
    EncoderParams p;
    if (!ctx.cfg.paths.init.empty()) {
      p = load_params(ctx.cfg.paths.init, ctx.cfg.arch);
    } else {
      Rng rng = Rng::stream(ctx.cfg.seed, "init");
      p = EncoderParams::init(ctx.cfg.arch, rng);
    }
    state = initial_state(std::move(p), tc);
  }
  const auto groups = make_param_groups(state.params, tc);
  TrainOptions opts;
  opts.abort_checkpoint = ctx.dir / "abort.ck";
  const long total = total_steps_for({corpus.region, corpus.whole}, tc);
  opts.on_step = [&](const LossRecord& r) {
    if (r.step % 50 == 0 || r.step == total) std::cerr << format_loss_record(r, groups) << "\n";
  };
  train({corpus.region, corpus.whole}, tc, state, opts);
  checkpoint_save(ctx.dir / "checkpoint.ck", state, tc);
  save_params(ctx.dir / "params.ck", state.params, DType::F32);
  io::write_file_atomic(ctx.dir / "loss_log.txt", format_loss_log(state.log, groups));
  ctx.artifact("checkpoint", ctx.dir / "checkpoint.ck");
  ctx.artifact("params_f32", ctx.dir / "params.ck");
  ctx.artifact("loss_log", ctx.dir / "loss_log.txt");
  std::cout << "trained " << state.optimizer.step << " steps, final loss "
            << (state.log.empty() ? 0.0 : state.log.back().loss) << "\n";
}

void cmd_eval_cls(Context& ctx) {
  const EncoderParams p = load_params(ctx.cfg.paths.checkpoint, ctx.cfg.arch);
  const RegionEvalSet set = eval_set(ctx.cfg);
  const ClassPromptSet prompts = ClassPromptSet::build(set.class_names, ctx.cfg.eval.templates, ctx.vocab, p);
  const AlphaSweep sweep = alpha_level_sweep(set, prompts, p);
  const ClassificationMetrics whole = whole_image_retrieval(set, ctx.vocab, p);
  EvalReport r = new_report(ctx);
  r.add("eval.scenes", static_cast<double>(set.scenes.size()));
  r.add_metrics("region.whole", sweep.whole);
  r.add_metrics("region.box", sweep.box);
  r.add_metrics("region.mask", sweep.mask);
  r.add_metrics("whole_image", whole);
  r.table.header = {"Alpha", "Top-1", "Top-5", "Mean/class"};
  for (auto [name, m] : {std::pair{"whole image", &sweep.whole}, {"rectangular box", &sweep.box}, {"mask", &sweep.mask}})
    r.table.rows.push_back({name, format_percent(m->top1), format_percent(m->top5), format_percent(m->mean_per_class)});
  write_report(ctx, r);
}

void cmd_eval_rec(Context& ctx) {
  const EncoderParams p = load_params(ctx.cfg.paths.checkpoint, ctx.cfg.arch);
  const EncoderParams base = ctx.cfg.paths.base.empty() ? p : load_params(ctx.cfg.paths.base, ctx.cfg.arch);
  const RegionEvalSet set = eval_set(ctx.cfg);
  const RecEvalResult res = evaluate_rec(set, ctx.vocab, ctx.cfg.preprocess, p, base);
  EvalReport r = new_report(ctx);
  r.add("rec.queries", static_cast<double>(res.queries));
  r.add("rec.alpha.accuracy", res.alpha_accuracy);
  r.add("rec.crop_baseline.accuracy", res.crop_accuracy);
  write_report(ctx, r);
}

void cmd_eval_baselines(Context& ctx) {
  const EncoderParams alpha = load_params(ctx.cfg.paths.checkpoint, ctx.cfg.arch);
  const EncoderParams original = load_params(ctx.cfg.paths.base, ctx.cfg.arch);
  const RegionEvalSet set = eval_set(ctx.cfg);
  const auto po = ClassPromptSet::build(set.class_names, ctx.cfg.eval.templates, ctx.vocab, original);
  const auto pa = ClassPromptSet::build(set.class_names, ctx.cfg.eval.templates, ctx.vocab, alpha);
  BaselineOptions opt;
  opt.red_circle.stroke = ctx.cfg.eval.red_circle_stroke;
  opt.red_circle.enlarge = ctx.cfg.eval.red_circle_enlarge;
  const auto rows = compare_baselines(set, po, original, pa, alpha, opt);
  EvalReport r = new_report(ctx);
  add_baselines(r, rows);
  write_report(ctx, r);
}

void cmd_viz_attn(Context& ctx) {
  const EncoderParams p = load_params(ctx.cfg.paths.checkpoint, ctx.cfg.arch);
  RunConfig c = ctx.cfg;
  c.data.eval_scenes = ctx.cfg.eval.viz_scene + 1;
  const RegionEvalSet set = eval_set(c);
  std::vector<const RegionItem*> regions;
  for (const auto& it : set.items)
    if (it.scene == static_cast<std::size_t>(ctx.cfg.eval.viz_scene)) regions.push_back(&it);
  if (ctx.cfg.eval.viz_region >= static_cast<int>(regions.size()))
    throw InputError("eval.viz_region: scene has only " + std::to_string(regions.size()) + " regions");
  const RegionItem& item = *regions[static_cast<std::size_t>(ctx.cfg.eval.viz_region)];
  const RgbaImage whole = region_input(set, item, AlphaLevel::Whole);
  const RgbaImage focus = region_input(set, item, AlphaLevel::Mask);
  const AttentionMap a_whole = extract_cls_attention(whole, p);
  const AttentionMap a_focus = extract_cls_attention(focus, p);
  const int scale = ctx.cfg.eval.viz_scale;
  const int cell = scale * p.arch.patch;

  RgbaImage alpha_view(focus.height, focus.width);
  for (int y = 0; y < focus.height; ++y)
    for (int x = 0; x < focus.width; ++x)
      for (int ch = 0; ch < 3; ++ch) alpha_view.at(y, x, ch) = focus.a(y, x);
  write_ppm(ctx.dir / "input.ppm", hstack({upscale(whole, scale), upscale(alpha_view, scale)}, scale));
  ctx.artifact("input", ctx.dir / "input.ppm");
  for (int h = 0; h < a_whole.heads; ++h) {
    const fs::path out = ctx.dir / ("head" + std::to_string(h) + ".ppm");
    write_ppm(out, hstack({render_attention(a_whole, h, cell), render_attention(a_focus, h, cell)}, scale));
    ctx.artifact("head" + std::to_string(h), out);
  }
  std::cout << "attention for \"" << item.caption << "\" written to " << ctx.dir.string()
            << " (left: alpha = 1, right: region alpha)\n";
}

void cmd_grad_check(Context& ctx) {
  const SyntheticCorpus corpus = build_synthetic_corpus(ctx.cfg.seed, 2, ctx.cfg.scene, ctx.vocab, ctx.cfg.arch.context_length);
  Rng rng = Rng::stream(ctx.cfg.seed, "init");
  const EncoderParams p = EncoderParams::init(ctx.cfg.arch, rng);
  std::vector<RgbaImage> images;
  std::vector<TokenIds> texts;
  for (std::size_t i = 0; i < corpus.region.size() && images.size() < 3; ++i) {
    images.push_back(corpus.region[i].image);
    texts.push_back(corpus.region[i].tokens);
  }
  images.push_back(corpus.whole[0].image);
  texts.push_back(corpus.whole[0].tokens);
  GradSpec spec;
  spec.text = true;
  const LossAndGrad lg = contrastive_step(p, images, texts, spec);
  auto loss = [&](const EncoderParams& q) { return contrastive_step(q, images, texts, spec).loss; };
  std::vector<std::string> names;
  for (const auto& [n, m] : named_tensors(p)) names.push_back(n);
  const GradCheckReport rep = grad_check(p, loss, lg.grad, names);
  EvalReport r = new_report(ctx);
  r.add("gradcheck.max_rel_error", rep.max_rel_error);
  r.add("gradcheck.worst_tensor", rep.worst_tensor);
  r.table.header = {"Tensor", "Checked", "Max rel err"};
  for (const auto& t : rep.tensors) {
    r.add("gradcheck." + t.tensor, t.max_rel_error);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", t.max_rel_error);
    r.table.rows.push_back({t.tensor, std::to_string(t.checked), buf});
  }
  write_report(ctx, r);
  if (rep.max_rel_error >= 1e-4) throw NumericError("gradient check failed on " + rep.worst_tensor);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const CorruptionError*>(&e) || dynamic_cast<const ProviderError*>(&e))
    return kInput;
  return kRuntime;
}

}  // namespace

DispatchResult dispatch(const std::string& command, RunConfig cfg) {
  DispatchResult res;
  const auto& cmds = commands();
  if (std::find(cmds.begin(), cmds.end(), command) == cmds.end()) {
    res.exit_code = kUsage;
    res.message = "unknown command '" + command + "'";
    return res;
  }
  std::optional<Context> ctx;
  try {
    Vocabulary vocab(corpus_words(cfg.scene));
    cfg.arch.vocab_size = vocab.size();
    validate(cfg);
    preflight(command, cfg);
    ctx.emplace(Context{cfg, command, std::move(vocab), {}, {}});
    ctx->manifest.command = command;
    ctx->manifest.config_hash = config_hash(cfg, command);
    ctx->manifest.seed = cfg.seed;
    ctx->dir = fs::path(cfg.paths.out) / (command + "-" + ctx->manifest.config_hash);
    res.run_dir = ctx->dir;
    fs::create_directories(ctx->dir);
    ctx->write_manifest();
    io::write_file_atomic(ctx->dir / "config.txt", serialize_config(cfg));
    ctx->artifact("config", ctx->dir / "config.txt");

    const auto t0 = std::chrono::steady_clock::now();
    if (command == "gen-data") cmd_gen_data(*ctx);
    else if (command == "train") cmd_train(*ctx);
    else if (command == "eval-cls") cmd_eval_cls(*ctx);
    else if (command == "eval-rec") cmd_eval_rec(*ctx);
    else if (command == "eval-baselines") cmd_eval_baselines(*ctx);
    else if (command == "viz-attn") cmd_viz_attn(*ctx);
    else if (command == "grad-check") cmd_grad_check(*ctx);
    ctx->manifest.timings.emplace_back(command, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    ctx->manifest.status = "complete";
    ctx->write_manifest();
  } catch (const std::exception& e) {
    res.exit_code = exit_code_for(e);
    res.message = e.what();
    if (ctx && fs::exists(ctx->dir)) {
      ctx->manifest.artifacts.emplace_back("error", e.what());
      try {
        ctx->write_manifest();
      } catch (...) {
      }
    }
  }
  return res;
}

}  // namespace alphaclip::cli
