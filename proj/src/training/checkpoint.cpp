#include <sstream>

#include "alphaclip/encoder/checkpoint.hpp"
#include "alphaclip/io.hpp"
#include "alphaclip/training/train.hpp"

namespace alphaclip {

namespace {

// Sections: params, optim.m, optim.v (f64) and log.records with one row per
// step: [step, loss, lr per group...].
TensorSection log_section(const std::vector<LossRecord>& log) {
  const std::size_t g = log.empty() ? 0 : log.front().lrs.size();
  TensorRecord r;
  r.name = "records";
  r.dtype = DType::F64;
  r.shape = {log.size(), 2 + g};
  for (const auto& rec : log) {
    if (rec.lrs.size() != g) throw InputError("loss log rows have differing group counts");
    r.values.push_back(static_cast<double>(rec.step));
    r.values.push_back(rec.loss);
    r.values.insert(r.values.end(), rec.lrs.begin(), rec.lrs.end());
  }
  return {"log", {r}};
}

std::vector<LossRecord> log_from_section(const TensorSection* s) {
  if (!s) throw CorruptionError("checkpoint has no log section");
  const TensorRecord* r = s->find("records");
  if (!r || r->shape.size() != 2 || r->shape[1] < 2 || r->values.size() != r->shape[0] * r->shape[1])
    throw CorruptionError("malformed loss log in checkpoint");
  std::vector<LossRecord> out;
  const std::size_t w = r->shape[1];
  for (std::size_t i = 0; i < r->shape[0]; ++i) {
    LossRecord rec;
    rec.step = static_cast<long>(r->values[i * w]);
    rec.loss = r->values[i * w + 1];
    rec.lrs.assign(r->values.begin() + static_cast<long>(i * w + 2), r->values.begin() + static_cast<long>((i + 1) * w));
    out.push_back(std::move(rec));
  }
  return out;
}

TensorSection renamed(TensorSection s, const std::string& name) {
  s.name = name;
  return s;
}

const TensorSection& need(const TensorContainer& c, const std::string& name) {
  const TensorSection* s = c.find(name);
  if (!s) throw CorruptionError("checkpoint has no " + name + " section");
  return *s;
}

LoadedCheckpoint load_impl(const std::filesystem::path& path, const ArchConfig* expected) {
  const TensorContainer c = TensorContainer::parse(io::read_file(path));
  ArchConfig arch;
  try {
    arch = ArchConfig::from_text(c.config);
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint architecture block: ") + e.what());
  }
  if (expected) arch = *expected;

  LoadedCheckpoint out;
  std::string train_text;
  long step = -1;
  for (const auto& e : kv::parse(c.meta)) {
    if (e.section == "train") train_text += e.key + " = " + kv::quote_if_needed(e.value) + "\n";
    else if (e.section == "state" && e.key == "step") step = kv::to_int(e);
  }
  if (step < 0) throw CorruptionError("checkpoint has no step counter");
  out.config = TrainConfig::from_text(train_text);

  out.state.params = params_from_section(need(c, "params"), arch);
  out.state.optimizer = OptimizerState::create(out.state.params, out.config);
  out.state.optimizer.m = params_from_section(need(c, "optim.m"), arch);
  out.state.optimizer.v = params_from_section(need(c, "optim.v"), arch);
  out.state.optimizer.step = step;
  out.state.params.temperature = arch.temperature;
  out.state.log = log_from_section(c.find("log"));
  return out;
}

}  // namespace

void checkpoint_save(const std::filesystem::path& path, const TrainState& state, const TrainConfig& cfg) {
  TensorContainer c;
  c.config = state.params.arch.to_text();
  c.meta = "[train]\n" + cfg.to_text() + "[state]\nstep = " + std::to_string(state.optimizer.step) + "\n";
  c.sections.push_back(params_section(state.params, DType::F64));
  c.sections.push_back(renamed(params_section(state.optimizer.m, DType::F64), "optim.m"));
  c.sections.push_back(renamed(params_section(state.optimizer.v, DType::F64), "optim.v"));
  c.sections.push_back(log_section(state.log));
  io::write_file_atomic(path, c.serialize());
}

LoadedCheckpoint checkpoint_load(const std::filesystem::path& path) { return load_impl(path, nullptr); }

LoadedCheckpoint checkpoint_load(const std::filesystem::path& path, const ArchConfig& expected) {
  return load_impl(path, &expected);
}

}  // namespace alphaclip
