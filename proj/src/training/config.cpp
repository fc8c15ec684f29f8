#include <cmath>
#include <sstream>

#include "alphaclip/training/train.hpp"

namespace alphaclip {

void TrainConfig::validate(int layers) const {
  auto fail = [](const char* key, const std::string& why) { throw ConfigError(std::string(key) + ": " + why); };
  if (!(r_s >= 0.0 && r_s <= 1.0)) fail("r_s", "must lie in [0, 1]");
  if (!(lr_alpha > 0.0 && std::isfinite(lr_alpha))) fail("lr_alpha", "must be positive");
  if (!(lr_rest > 0.0 && std::isfinite(lr_rest))) fail("lr_rest", "must be positive");
  if (!(weight_decay >= 0.0 && std::isfinite(weight_decay))) fail("weight_decay", "must be >= 0");
  if (unfreeze_blocks < -1) fail("unfreeze_blocks", "must be -1 (all) or in [0, layers]");
  if (layers >= 0 && unfreeze_blocks > layers)
    fail("unfreeze_blocks", "exceeds the " + std::to_string(layers) + " image blocks");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (batch < 1) fail("batch", "must be >= 1");
  if (total_steps < 0) fail("total_steps", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (!(eps > 0.0)) fail("eps", "must be positive");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "stage = " << (stage == TrainStage::Pretrain ? "pretrain" : "alpha") << "\n"
     << "r_s = " << r_s << "\n"
     << "lr_alpha = " << lr_alpha << "\n"
     << "lr_rest = " << lr_rest << "\n"
     << "weight_decay = " << weight_decay << "\n"
     << "unfreeze_blocks = " << unfreeze_blocks << "\n"
     << "epochs = " << epochs << "\n"
     << "batch = " << batch << "\n"
     << "seed = " << seed << "\n"
     << "total_steps = " << total_steps << "\n"
     << "beta1 = " << beta1 << "\n"
     << "beta2 = " << beta2 << "\n"
     << "eps = " << eps << "\n"
     << "decay_norms = " << (decay_norms ? "true" : "false") << "\n";
  return os.str();
}

void TrainConfig::set(const kv::Entry& e) {
  const auto& k = e.key;
  if (k == "stage") {
    if (e.value == "alpha") stage = TrainStage::AlphaFinetune;
    else if (e.value == "pretrain") stage = TrainStage::Pretrain;
    else throw ConfigError("train.stage: expected alpha or pretrain, got '" + e.value + "'");
  } else if (k == "r_s") r_s = kv::to_double(e);
  else if (k == "lr_alpha") lr_alpha = kv::to_double(e);
  else if (k == "lr_rest") lr_rest = kv::to_double(e);
  else if (k == "weight_decay") weight_decay = kv::to_double(e);
  else if (k == "unfreeze_blocks") unfreeze_blocks = kv::to_int(e);
  else if (k == "epochs") epochs = kv::to_int(e);
  else if (k == "batch") batch = kv::to_int(e);
  else if (k == "seed") seed = kv::to_u64(e);
  else if (k == "total_steps") total_steps = kv::to_int(e);
  else if (k == "beta1") beta1 = kv::to_double(e);
  else if (k == "beta2") beta2 = kv::to_double(e);
  else if (k == "eps") eps = kv::to_double(e);
  else if (k == "decay_norms") decay_norms = kv::to_bool(e);
  else throw ConfigError("train." + k + ": unknown key");
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig c;
  for (const auto& e : kv::parse(text)) {
    if (!e.section.empty() && e.section != "train") throw ConfigError("unexpected section [" + e.section + "]");
    c.set(e);
  }
  try {
    c.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("train.") + err.what());
  }
  return c;
}

}  // namespace alphaclip
