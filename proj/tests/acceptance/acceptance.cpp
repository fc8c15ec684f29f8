// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// the number of failures. Trained desk models are cached in --cache, keyed by
// the full training configuration.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "../unit/helpers.hpp"
#include "alphaclip/datagen/mask.hpp"
#include "alphaclip/datagen/pipelines.hpp"
#include "alphaclip/encoder/checkpoint.hpp"
#include "alphaclip/encoder/loss.hpp"
#include "alphaclip/evaluation/eval.hpp"
#include "alphaclip/evaluation/report.hpp"
#include "alphaclip/io.hpp"
#include "alphaclip/training/train.hpp"

using namespace alphaclip;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- desk setup -----------------------------------------------------------

const std::vector<std::uint64_t> kSeeds{0, 1, 2};
constexpr int kPretrainSteps = 3000;
constexpr int kFinetuneSteps = 1000;
constexpr int kCorpusScenes = 3000;

struct Desk {
  SceneSpec spec;
  Vocabulary vocab{corpus_words(SceneSpec{})};
  ArchConfig arch;
  fs::path cache;
  std::optional<SyntheticCorpus> corpus_;
  std::optional<RegionEvalSet> eval_;
  std::optional<RegionEvalSet> rec_;
  std::optional<EncoderParams> base_;
  double base_seconds = 0;
  std::map<std::string, std::pair<EncoderParams, double>> tuned_;

  Desk() {
    arch.width = 32;
    arch.embed_dim = 32;
    arch.text_width = 32;
    arch.vocab_size = vocab.size();
  }

  const SyntheticCorpus& corpus() {
    if (!corpus_) corpus_ = build_synthetic_corpus(1, kCorpusScenes, spec, vocab, arch.context_length);
    return *corpus_;
  }
  SceneSpec eval_spec() const {
    SceneSpec s = spec;
    s.min_shapes = 2;
    return s;
  }
  const RegionEvalSet& eval_set() {
    if (!eval_) eval_ = make_region_eval_set(99, 300, eval_spec());
    return *eval_;
  }
  const RegionEvalSet& rec_set() {
    if (!rec_) rec_ = make_region_eval_set(77, 200, eval_spec());
    return *rec_;
  }

  static TrainConfig pretrain_config() {
    TrainConfig c;
    c.stage = TrainStage::Pretrain;
    c.r_s = 1.0;
    c.lr_rest = 1e-3;
    c.total_steps = kPretrainSteps;
    return c;
  }
  static TrainConfig finetune_config(double r_s, int unfreeze, std::uint64_t seed) {
    TrainConfig c;
    c.r_s = r_s;
    c.unfreeze_blocks = unfreeze;
    c.lr_alpha = 1e-2;
    c.lr_rest = 1e-3;
    c.total_steps = kFinetuneSteps;
    c.seed = seed;
    return c;
  }

  std::string key(const TrainConfig& c, const std::string& parent) const {
    Fnv1a64 h;
    h.update(arch.to_text());
    h.update(spec.to_text());
    h.update(std::to_string(kCorpusScenes));
    h.update(c.to_text());
    h.update(parent);
    return hex64(h.digest());
  }

  // Trains (or loads) and returns params plus the wall time the training took.
  std::pair<EncoderParams, double> trained(const std::string& tag, const TrainConfig& cfg, const EncoderParams& init,
                                           const std::string& parent) {
    const std::string k = key(cfg, parent);
    const fs::path ck = cache / (tag + "-" + k + ".ck");
    const fs::path tm = cache / (tag + "-" + k + ".seconds");
    if (fs::exists(ck) && fs::exists(tm)) {
      std::cerr << "  " << tag << ": cached " << ck.filename().string() << "\n";
      return {load_params(ck, arch), std::stod(io::read_file(tm))};
    }
    std::cerr << "  " << tag << ": training " << cfg.total_steps << " steps\n";
    const auto t0 = Clock::now();
    const auto& c = corpus();
    TrainState st = initial_state(init, cfg);
    TrainOptions opt;
    opt.on_step = [&](const LossRecord& r) {
      if (r.step % 250 == 0)
        std::cerr << "    step " << r.step << " loss " << fmt(r.loss) << " (" << fmt(seconds_since(t0), 3) << " s)\n";
    };
    train({c.region, c.whole}, cfg, st, opt);
    const double secs = seconds_since(t0);
    fs::create_directories(cache);
    save_params(ck, st.params, DType::F64);
    io::write_file_atomic(tm, format_double(secs));
    return {std::move(st.params), secs};
  }

  const EncoderParams& base() {
    if (!base_) {
      Rng rng = Rng::stream(0, "init");
      auto [p, s] = trained("base", pretrain_config(), EncoderParams::init(arch, rng), "");
      base_ = std::move(p);
      base_seconds = s;
    }
    return *base_;
  }
  std::string base_key() { return key(pretrain_config(), ""); }

  // unfreeze -1 means every block.
  const std::pair<EncoderParams, double>& tuned(double r_s, int unfreeze, std::uint64_t seed) {
    const std::string tag = "ft_rs" + fmt(r_s) + "_u" + std::to_string(unfreeze) + "_s" + std::to_string(seed);
    auto it = tuned_.find(tag);
    if (it == tuned_.end()) {
      const EncoderParams& b = base();
      it = tuned_.emplace(tag, trained(tag, finetune_config(r_s, unfreeze, seed), b, base_key())).first;
    }
    return it->second;
  }

  ClassPromptSet prompts(const EncoderParams& p) {
    return ClassPromptSet::build(eval_set().class_names, {"a {name}"}, vocab, p);
  }

  std::map<std::string, AlphaSweep> sweeps_;
  const AlphaSweep& sweep(double r_s, int unfreeze, std::uint64_t seed) {
    const std::string tag = fmt(r_s) + "/" + std::to_string(unfreeze) + "/" + std::to_string(seed);
    auto it = sweeps_.find(tag);
    if (it == sweeps_.end()) {
      const EncoderParams& p = tuned(r_s, unfreeze, seed).first;
      it = sweeps_.emplace(tag, alpha_level_sweep(eval_set(), prompts(p), p)).first;
    }
    return it->second;
  }
};

bool params_equal(const EncoderParams& a, const EncoderParams& b) {
  const auto ta = named_tensors(a);
  const auto tb = named_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (ta[i].first != tb[i].first || ta[i].second->rows() != tb[i].second->rows() ||
        ta[i].second->cols() != tb[i].second->cols() || *ta[i].second != *tb[i].second)
      return false;
  return true;
}

// ---- criteria ---------------------------------------------------------------

Outcome zero_init_noop(Desk& d) {
  const auto t0 = Clock::now();
  Rng rng(101);
  const EncoderParams p = EncoderParams::init(d.arch, rng);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const RgbaImage im = testutil::random_image(d.arch.image_size, d.arch.image_size, rng);
    worst = std::max(worst, (encode_image(im, p) - encode_image_rgb(im, p)).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-10 && secs < 10.0, "max |diff| " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

Outcome gradient_verification(Desk& d) {
  const auto t0 = Clock::now();
  ArchConfig a = d.arch;
  a.width = a.embed_dim = a.text_width = 16;
  a.layers = 2;
  a.text_layers = 2;
  Rng rng = Rng::stream(0, "gradcheck");
  const EncoderParams p = EncoderParams::init(a, rng);
  const SyntheticCorpus c = build_synthetic_corpus(3, 3, d.spec, d.vocab, a.context_length);
  std::vector<RgbaImage> images;
  std::vector<TokenIds> texts;
  for (std::size_t i = 0; i < 3; ++i) {
    images.push_back(c.region[i].image);
    texts.push_back(c.region[i].tokens);
  }
  images.push_back(c.whole[0].image);
  texts.push_back(c.whole[0].tokens);
  GradSpec spec;
  spec.text = true;
  const LossAndGrad lg = contrastive_step(p, images, texts, spec);
  auto loss = [&](const EncoderParams& q) { return contrastive_step(q, images, texts, spec).loss; };
  std::vector<std::string> names;
  for (const auto& [n, m] : named_tensors(p)) names.push_back(n);
  const bool alpha_zero = p.alpha_patch_kernel.isZero(0.0);
  const GradCheckReport rep = grad_check(p, loss, lg.grad, names);
  // Every tensor belongs to some trainable group in one of the two stages.
  TrainConfig ft;
  ft.unfreeze_blocks = -1;
  TrainConfig pre;
  pre.stage = TrainStage::Pretrain;
  std::size_t covered = 0;
  for (const auto& e : rep.tensors) {
    bool trainable = false;
    for (const auto* cfg : {&ft, &pre})
      for (const auto& g : make_param_groups(p, *cfg))
        if (g.trainable && std::find(g.tensors.begin(), g.tensors.end(), e.tensor) != g.tensors.end())
          trainable = true;
    covered += trainable;
  }
  const double secs = seconds_since(t0);
  return {rep.max_rel_error < 1e-4 && alpha_zero && covered == names.size() && secs < 120.0,
          "max rel " + fmt(rep.max_rel_error) + " (" + rep.worst_tensor + "), " + std::to_string(names.size()) +
              " tensors, " + fmt(secs, 3) + " s"};
}

Outcome loss_analytics() {
  Rng rng(5);
  double worst = 0;
  for (int n = 1; n <= 64; ++n) {
    Vec e(8);
    for (auto& v : e) v = rng.normal();
    e.normalize();
    const Mat m = e.replicate(n, 1);
    for (double tau : {0.07, 1.0}) {
      const double l = contrastive_loss(m, m, tau).loss;
      worst = std::max(worst, std::abs(l - std::log(static_cast<double>(n))));
      if (n == 1 && l != 0.0) return {false, "n = 1 loss " + fmt(l)};
    }
  }
  return {worst <= 1e-9, "max |loss - ln n| " + fmt(worst)};
}

Outcome region_focus(Desk& d) {
  bool ok = true;
  std::string detail;
  for (auto s : kSeeds) {
    const auto& sw = d.sweep(0.1, -1, s);
    const bool this_ok = sw.mask.top1 >= 0.90 && sw.whole.top1 < sw.box.top1 && sw.box.top1 < sw.mask.top1;
    ok = ok && this_ok;
    detail += "seed " + std::to_string(s) + ": " + fmt(sw.whole.top1) + " < " + fmt(sw.box.top1) + " < " +
              fmt(sw.mask.top1) + "; ";
  }
  const double secs = d.base_seconds + d.tuned(0.1, -1, kSeeds[0]).second;
  ok = ok && secs <= 1800.0;
  detail += "train " + fmt(secs / 60.0, 3) + " min";
  return {ok, detail};
}

Outcome sample_ratio(Desk& d) {
  bool ok = true;
  std::string detail;
  for (auto s : kSeeds) {
    const double w01 = whole_image_retrieval(d.eval_set(), d.vocab, d.tuned(0.1, -1, s).first).top1;
    const double w0 = whole_image_retrieval(d.eval_set(), d.vocab, d.tuned(0.0, -1, s).first).top1;
    const double r01 = d.sweep(0.1, -1, s).mask.top1;
    const double r09 = d.sweep(0.9, -1, s).mask.top1;
    ok = ok && w01 > w0 && r01 > r09;
    detail += "seed " + std::to_string(s) + ": whole " + fmt(w01) + " vs " + fmt(w0) + ", region " + fmt(r01) +
              " vs " + fmt(r09) + "; ";
  }
  return {ok, detail};
}

Outcome unfreeze_ablation(Desk& d) {
  const int L = d.arch.layers;
  const std::vector<int> depths{0, L / 2, L};
  int inversions = 0;
  double worst = 0;
  std::string detail;
  for (auto s : kSeeds) {
    std::vector<double> acc;
    for (int k : depths) acc.push_back(d.sweep(0.1, k == L ? -1 : k, s).mask.top1);
    detail += "seed " + std::to_string(s) + ": " + fmt(acc[0]) + ", " + fmt(acc[1]) + ", " + fmt(acc[2]) + "; ";
    for (std::size_t i = 0; i + 1 < acc.size(); ++i)
      if (acc[i + 1] < acc[i]) {
        ++inversions;
        worst = std::max(worst, acc[i] - acc[i + 1]);
      }
  }
  detail += std::to_string(inversions) + " inversion(s)";
  return {inversions == 0 || (inversions == 1 && worst <= 0.01), detail};
}

BinaryMask random_bits(int h, int w, Rng& rng) {
  return testutil::random_mask(h, w, rng, rng.uniform(0.02, 0.6));
}

PooledMask brute_pool(const BinaryMask& m, int patch) {
  PooledMask out{m.height / patch, m.width / patch, {}};
  out.cells.assign(static_cast<std::size_t>(out.rows * out.cols), 0);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) {
      std::uint8_t mx = 0;
      for (int y = i * patch; y < (i + 1) * patch; ++y)
        for (int x = j * patch; x < (j + 1) * patch; ++x) mx = std::max(mx, m(y, x));
      out.cells[static_cast<std::size_t>(i * out.cols + j)] = mx;
    }
  return out;
}

Outcome pool_oracle() {
  const auto t0 = Clock::now();
  Rng rng(7);
  long checked = 0, bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const BinaryMask m = random_bits(16, 16, rng);
    for (int patch : {1, 2, 4, 8, 16}) {
      bad += !(pool_mask(m, patch) == brute_pool(m, patch));
      ++checked;
    }
  }
  for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
    BinaryMask m(4, 4);
    for (int k = 0; k < 16; ++k) m.bits[static_cast<std::size_t>(k)] = (bits >> k) & 1u;
    for (int patch : {1, 2, 4}) {
      bad += !(pool_mask(m, patch) == brute_pool(m, patch));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0,
          std::to_string(checked) + " poolings, " + std::to_string(bad) + " mismatches, " + fmt(secs, 3) + " s"};
}

Outcome attention_masking(Desk& d) {
  const EncoderParams& p = d.tuned(0.1, -1, kSeeds[0]).first;
  const int g = d.arch.grid();
  Rng rng(8);
  int nonzero = 0, unequal = 0;
  for (int t = 0; t < 50; ++t) {
    const RgbaImage im = testutil::random_image(d.arch.image_size, d.arch.image_size, rng);
    PooledMask ones{g, g, std::vector<std::uint8_t>(static_cast<std::size_t>(g * g), 1)};
    unequal += !(masked_last_attention_encode(im, ones, p) == encode_image(im, p));
    PooledMask m = pool_mask(random_bits(d.arch.image_size, d.arch.image_size, rng), d.arch.patch);
    if (m.all_zero()) m.cells[0] = 1;
    const std::vector<PooledMask> masks{m};
    ImageEncodeOptions opt;
    opt.last_attention_masks = masks;
    const AttentionMap am = extract_cls_attention(im, p, opt);
    for (int h = 0; h < am.heads; ++h)
      for (int j = 0; j < g * g; ++j)
        if (!m.cells[static_cast<std::size_t>(j)] && am.weights(h, 1 + j) != 0.0) ++nonzero;
  }
  return {nonzero == 0 && unequal == 0,
          std::to_string(nonzero) + " nonzero background weights, " + std::to_string(unequal) + " all-ones mismatches"};
}

Outcome rec_pipeline(Desk& d) {
  const PreprocessSpec spec;
  const RegionEvalSet& set = d.rec_set();
  bool ok = true;
  std::string detail;
  for (auto s : kSeeds) {
    const RecEvalResult r = evaluate_rec(set, d.vocab, spec, d.tuned(0.1, -1, s).first, d.base());
    ok = ok && r.alpha_accuracy >= r.crop_accuracy + 0.05;
    detail += "seed " + std::to_string(s) + ": " + fmt(r.alpha_accuracy) + " vs crop " + fmt(r.crop_accuracy) + "; ";
  }
  // Properties over every scene of the set with the seed-0 model.
  const EncoderParams& p = d.tuned(0.1, -1, kSeeds[0]).first;
  long singles = 0, perms = 0, violations = 0;
  for (std::size_t si = 0; si < set.scenes.size(); ++si) {
    std::vector<Proposal> props;
    std::vector<const RegionItem*> items;
    for (const auto& it : set.items)
      if (it.scene == si) {
        props.push_back({it.box, it.mask});
        items.push_back(&it);
      }
    const Embedding expr = encode_text(d.vocab.encode(items[0]->caption, d.arch.context_length), p);
    for (const auto& pr : props) {
      const std::vector<Proposal> one{pr};
      violations += rec_select(set.scenes[si], one, expr, spec, p).index != 0;
      ++singles;
    }
    const RecResult ref = rec_select(set.scenes[si], props, expr, spec, p);
    std::vector<std::size_t> order(props.size());
    std::iota(order.begin(), order.end(), 0);
    do {
      std::vector<Proposal> perm;
      for (auto k : order) perm.push_back(props[k]);
      violations += order[rec_select(set.scenes[si], perm, expr, spec, p).index] != ref.index;
      ++perms;
    } while (std::next_permutation(order.begin(), order.end()));
  }
  detail += std::to_string(singles) + " single-proposal and " + std::to_string(perms) + " permutation checks, " +
            std::to_string(violations) + " violations";
  return {ok && violations == 0, detail};
}

Outcome baseline_harness(Desk& d) {
  const RegionEvalSet& set = d.eval_set();
  const EncoderParams& base = d.base();
  const ClassPromptSet pb = d.prompts(base);
  bool ok = true;
  std::string detail;
  {
    const auto rows = compare_baselines(set, pb, base, pb, base);
    const bool same = rows.size() == 6 && rows[5].metrics.predictions == rows[0].metrics.predictions &&
                      rows[5].metrics.top1 == rows[0].metrics.top1 && rows[5].metrics.top5 == rows[0].metrics.top5 &&
                      rows[5].metrics.mean_per_class == rows[0].metrics.mean_per_class;
    ok = ok && same;
    detail += std::string("zero-init row ") + (same ? "identical" : "DIFFERS") + "; ";
  }
  std::optional<std::vector<BaselineRow>> first;
  for (auto s : kSeeds) {
    const EncoderParams& p = d.tuned(0.1, -1, s).first;
    const auto rows = compare_baselines(set, pb, base, d.prompts(p), p);
    bool top = rows.size() == 6;
    for (std::size_t i = 0; top && i < 5; ++i)
      top = rows[5].metrics.top1 >= rows[i].metrics.top1 && rows[5].metrics.top5 >= rows[i].metrics.top5 &&
            rows[5].metrics.mean_per_class >= rows[i].metrics.mean_per_class;
    ok = ok && top;
    detail += "seed " + std::to_string(s) + " Alpha-CLIP " + format_percent(rows[5].metrics.top1) + "/" +
              format_percent(rows[5].metrics.top5) + "/" + format_percent(rows[5].metrics.mean_per_class) +
              (top ? "" : " NOT max") + "; ";
    if (!first) first = rows;
  }
  std::cerr << baseline_table(*first).render();
  return {ok, detail};
}

// Single-byte flips at chosen offsets plus truncations must all throw.
long undetected_corruptions(const fs::path& good, const std::function<void(const fs::path&)>& load, Rng& rng,
                            long flips, long* tried) {
  const std::string bytes = io::read_file(good);
  const fs::path bad = good.string() + ".bad";
  long missed = 0;
  auto attempt = [&](const std::string& data) {
    io::write_file_atomic(bad, data);
    ++*tried;
    try {
      load(bad);
      ++missed;
    } catch (const CorruptionError&) {
    } catch (const InputError&) {
    }
  };
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < std::min<std::size_t>(64, bytes.size()); ++i) offsets.push_back(i);
  for (std::size_t i = bytes.size() - std::min<std::size_t>(16, bytes.size()); i < bytes.size(); ++i)
    offsets.push_back(i);
  for (long k = 0; k < flips; ++k)
    offsets.push_back(static_cast<std::size_t>(rng.next_u64() % bytes.size()));
  for (auto off : offsets) {
    std::string data = bytes;
    data[off] = static_cast<char>(data[off] ^ (1 << rng.uniform_int(0, 7)));
    attempt(data);
  }
  for (int k = 0; k < 50; ++k) attempt(bytes.substr(0, static_cast<std::size_t>(rng.next_u64() % bytes.size())));
  fs::remove(bad);
  return missed;
}

Outcome determinism(Desk& d, const fs::path& scratch) {
  fs::create_directories(scratch);
  std::vector<std::string> failures;
  SceneSpec spec = d.spec;
  // Shards.
  const auto c1 = build_synthetic_corpus(5, 40, spec, d.vocab, d.arch.context_length);
  const auto c2 = build_synthetic_corpus(5, 40, spec, d.vocab, d.arch.context_length);
  shard_write(c1.region, scratch / "a.shard");
  shard_write(c2.region, scratch / "b.shard");
  if (io::read_file(scratch / "a.shard") != io::read_file(scratch / "b.shard")) failures.push_back("shards");
  if (shard_read(scratch / "a.shard") != c1.region) failures.push_back("shard round trip");

  // Loss logs, resume and reports on a small model.
  ArchConfig a = d.arch;
  a.width = a.embed_dim = a.text_width = 16;
  a.layers = 2;
  TrainConfig tc = Desk::finetune_config(0.1, -1, 11);
  tc.total_steps = 40;
  tc.batch = 16;
  auto run = [&](std::optional<long> stop) {
    Rng rng = Rng::stream(0, "init");
    TrainState st = initial_state(EncoderParams::init(a, rng), tc);
    TrainOptions opt;
    opt.stop_at = stop;
    train({c1.region, c1.whole}, tc, st, opt);
    return st;
  };
  const TrainState full = run(std::nullopt);
  const TrainState again = run(std::nullopt);
  const auto groups = make_param_groups(full.params, tc);
  if (format_loss_log(full.log, groups) != format_loss_log(again.log, groups)) failures.push_back("loss log");
  TrainState part = run(17);
  checkpoint_save(scratch / "part.ck", part, tc);
  LoadedCheckpoint loaded = checkpoint_load(scratch / "part.ck", a);
  train({c1.region, c1.whole}, loaded.config, loaded.state, {});
  if (!params_equal(loaded.state.params, full.params) || loaded.state.log != full.log) failures.push_back("resume");

  auto report = [&](const EncoderParams& p) {
    const RegionEvalSet set = make_region_eval_set(3, 20, d.eval_spec());
    const ClassPromptSet pr = ClassPromptSet::build(set.class_names, {"a {name}"}, d.vocab, p);
    const AlphaSweep sw = alpha_level_sweep(set, pr, p);
    EvalReport r;
    r.command = "eval-cls";
    r.seed = 11;
    r.add_metrics("region.mask", sw.mask);
    r.add_metrics("whole_image", whole_image_retrieval(set, d.vocab, p));
    return r.to_text();
  };
  if (report(full.params) != report(again.params)) failures.push_back("report");

  // Corruption.
  Rng rng(12);
  long tried = 0, missed = 0;
  missed += undetected_corruptions(scratch / "a.shard", [](const fs::path& p) { shard_read(p); }, rng, 500, &tried);
  missed += undetected_corruptions(scratch / "part.ck", [&](const fs::path& p) { checkpoint_load(p, a); }, rng, 500,
                                   &tried);
  save_params(scratch / "p.ck", full.params, DType::F32);
  missed += undetected_corruptions(scratch / "p.ck", [&](const fs::path& p) { load_params(p, a); }, rng, 500, &tried);
  if (missed) failures.push_back(std::to_string(missed) + " undetected corruptions");
  fs::remove_all(scratch);

  std::string detail = "shards, loss log, resume, report reproduced; " + std::to_string(tried) + " corruptions tried";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " " + f;
  }
  return {failures.empty(), detail};
}

Outcome metric_oracle() {
  auto rows = [](const std::vector<int>& cls, int n) {
    Mat m = Mat::Zero(static_cast<Eigen::Index>(cls.size()), n);
    for (std::size_t i = 0; i < cls.size(); ++i) m(static_cast<Eigen::Index>(i), cls[i]) = 1.0;
    return m;
  };
  std::vector<std::string> bad;
  // Three samples of one class with one miss plus one correct sample of another.
  {
    const std::vector<int> labels{0, 0, 0, 1};
    const auto m = classify_embeddings(rows({0, 1, 0, 1}, 2), labels, Mat::Identity(2, 2));
    if (std::abs(m.mean_per_class - 5.0 / 6.0) > 1e-15 || m.top1 != 0.75) bad.push_back("5/6 example");
  }
  {
    const std::vector<int> labels{2, 2, 0, 1, 1, 1};
    const auto m = classify_embeddings(rows({2, 0, 0, 1, 2, 2}, 3), labels, Mat::Identity(3, 3));
    // class 0: 1/1, class 1: 1/3, class 2: 1/2
    if (std::abs(m.mean_per_class - (1.0 + 1.0 / 3.0 + 0.5) / 3.0) > 1e-15) bad.push_back("three-class example");
  }
  {
    const std::vector<int> labels{0, 3};
    const auto m = classify_embeddings(rows({0, 1}, 4), labels, Mat::Identity(4, 4));
    if (m.mean_per_class != 0.5 || m.excluded_classes != std::vector<int>{1, 2}) bad.push_back("absent classes");
  }
  Rng rng(13);
  int trials = 0;
  for (; trials < 200; ++trials) {
    const int classes = rng.uniform_int(2, 10);
    const int n = rng.uniform_int(1, 300);
    std::vector<int> labels(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = rng.uniform_int(0, classes - 1);
      pred[static_cast<std::size_t>(i)] =
          rng.bernoulli(0.5) ? labels[static_cast<std::size_t>(i)] : rng.uniform_int(0, classes - 1);
    }
    const auto m = classify_embeddings(rows(pred, classes), labels, Mat::Identity(classes, classes));
    double sum = 0;
    int present = 0;
    for (int c = 0; c < classes; ++c) {
      int cnt = 0, hit = 0;
      for (int i = 0; i < n; ++i)
        if (labels[static_cast<std::size_t>(i)] == c) {
          ++cnt;
          hit += pred[static_cast<std::size_t>(i)] == c;
        }
      if (cnt) {
        sum += static_cast<double>(hit) / cnt;
        ++present;
      }
    }
    if (std::abs(m.mean_per_class - sum / present) > 1e-12) {
      bad.push_back("random dataset " + std::to_string(trials));
      break;
    }
  }
  std::string detail = "3 handcrafted + " + std::to_string(trials) + " random datasets";
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alphaclip acceptance suite"};
  std::string cache = "acceptance_cache";
  std::vector<int> only;
  app.add_option("--cache", cache, "directory for trained desk models");
  app.add_option("--only", only, "run just these criteria (1-12)");
  CLI11_PARSE(app, argc, argv);

  Desk desk;
  desk.cache = cache;
  const fs::path scratch = fs::path(cache) / "scratch";

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"zero-init no-op", [&] { return zero_init_noop(desk); }},
      {"gradient verification", [&] { return gradient_verification(desk); }},
      {"loss analytics", [] { return loss_analytics(); }},
      {"region-focus learning", [&] { return region_focus(desk); }},
      {"whole-image preservation and r_s ablation", [&] { return sample_ratio(desk); }},
      {"unfreeze ablation", [&] { return unfreeze_ablation(desk); }},
      {"pool_mask oracle", [] { return pool_oracle(); }},
      {"attention-masking exactness", [&] { return attention_masking(desk); }},
      {"REC pipeline", [&] { return rec_pipeline(desk); }},
      {"baseline harness", [&] { return baseline_harness(desk); }},
      {"determinism and persistence", [&] { return determinism(desk, scratch); }},
      {"metric oracle", [] { return metric_oracle(); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    std::cerr << "[" << id << "] " << criteria[i].first << "\n";
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    while (o.detail.size() >= 2 && o.detail.compare(o.detail.size() - 2, 2, "; ") == 0) o.detail.resize(o.detail.size() - 2);
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << " ["
              << fmt(seconds_since(t0), 3) << " s]\n"
              << std::flush;
  }
  return failures;
}
