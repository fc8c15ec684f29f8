#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "alphaclip/cli/run.hpp"
#include "alphaclip/io.hpp"

namespace alphaclip::cli {

namespace {

// "--section.key value" and "--section.key=value" pairs left over by CLI11.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError(key + ": missing value");
      value = extras[++i];
    }
    if (key.find('.') == std::string::npos) throw ConfigError("unknown option '--" + key + "'");
    out.emplace_back(key, value);
  }
  return out;
}

}  // namespace

int run_main(int argc, char** argv) {
  CLI::App app{"Region-focused contrastive image-text encoder at small scale"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, CLI::App*> subs;
  const std::map<std::string, std::string> about{
      {"gen-data", "write region and whole-image shards"},
      {"train", "pretrain or alpha fine-tune; writes checkpoint.ck, params.ck, loss_log.txt"},
      {"eval-cls", "region classification at whole/box/mask alpha, plus whole-image retrieval"},
      {"eval-rec", "referring expression selection vs the crop-only reference"},
      {"eval-baselines", "six-row comparison against image- and feature-level baselines"},
      {"viz-attn", "last-block CLS attention maps as PPM images"},
      {"grad-check", "analytic vs central-difference gradients on every tensor"},
  };
  for (const auto& c : commands()) {
    auto* sub = app.add_subcommand(c, about.count(c) ? about.at(c) : "");
    sub->add_option("--config", config_path, "kv config file; --section.key value overrides follow");
    sub->allow_extras();
    subs[c] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      if (!std::filesystem::is_regular_file(config_path)) throw ConfigError("--config: no such file " + config_path);
      cfg = parse_config(io::read_file(config_path));
    }
    for (const auto& [k, v] : parse_overrides(subs[command]->remaining())) apply_override(cfg, k, v);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  const DispatchResult r = dispatch(command, cfg);
  if (r.exit_code != kOk) {
    std::cerr << "error: " << r.message << "\n";
  } else {
    std::cerr << "run directory: " << r.run_dir.string() << "\n";
  }
  return r.exit_code;
}

}  // namespace alphaclip::cli
