#include "mvad/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "mvad/errors.hpp"
#include "mvad/text.hpp"

namespace fs = std::filesystem;

namespace mvad {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ValidationError(where + ": " + msg);
}

double want_double(const std::string& value, const std::string& where) {
  double out;
  if (!text::parse_double(value, out)) fail(where, "expected a number, got '" + value + "'");
  return out;
}

std::size_t want_size(const std::string& value, const std::string& where) {
  std::size_t out;
  if (!text::parse_size(value, out))
    fail(where, "expected a non-negative integer, got '" + value + "'");
  return out;
}

}  // namespace

void apply_config_key(RunConfig& config, const std::string& key, const std::string& value,
                      const std::string& where) {
  if (key == "manifest") {
    config.manifest = value;
  } else if (key == "out_dir") {
    config.out_dir = value;
  } else if (key == "seed") {
    config.set_seed(want_size(value, where));
  } else if (key == "epochs") {
    config.hp.epochs = want_size(value, where);
  } else if (key == "learning_rate") {
    config.hp.learning_rate = want_double(value, where);
  } else if (key == "epsilon") {
    config.hp.epsilon = want_double(value, where);
  } else if (key == "embed_dim") {
    config.hp.F_L = want_size(value, where);
  } else if (key == "attn_dim") {
    config.hp.F_A = want_size(value, where);
  } else if (key == "layers") {
    config.hp.L = want_size(value, where);
  } else if (key == "fusion") {
    config.hp.fusion = fusion_from_string(value);
  } else if (key == "encoder") {
    config.hp.encoder = encoder_from_string(value);
  } else if (key == "activation") {
    config.hp.activation = activation_from_string(value);
  } else if (key == "block_rows") {
    config.hp.block_rows = want_size(value, where);
  } else if (key == "clique_size") {
    config.injection.clique_size = want_size(value, where);
  } else if (key == "n_cliques") {
    config.injection.n_cliques = want_size(value, where);
  } else if (key == "n_attr_anomalies") {
    config.injection.n_attr_anomalies = want_size(value, where);
  } else if (key == "candidate_pool") {
    config.injection.candidate_pool = want_size(value, where);
  } else if (key == "target_views") {
    if (value == "all") {
      config.injection.target_mode = TargetViews::all;
      config.injection.view_names.clear();
    } else if (value == "random-one") {
      config.injection.target_mode = TargetViews::random_one;
      config.injection.view_names.clear();
    } else {
      config.injection.target_mode = TargetViews::named;
      config.injection.view_names = text::split_csv(value);
      for (const auto& name : config.injection.view_names)
        if (name.empty()) fail(where, "empty view name in target_views list");
    }
  } else if (key == "k_list") {
    config.k_list.clear();
    for (const auto& tok : text::split_csv(value)) config.k_list.push_back(want_size(tok, where));
  } else if (key == "epsilon_sweep") {
    config.epsilon_sweep.clear();
    for (const auto& tok : text::split_csv(value))
      config.epsilon_sweep.push_back(want_double(tok, where));
  } else {
    fail(where, "unknown config key '" + key + "'");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    std::string body = text::trim(text::strip_comment(line));
    if (body.empty()) continue;
    std::size_t eq = body.find('=');
    if (eq == std::string::npos) fail(where, "expected 'key = value'");
    std::string key = text::trim(body.substr(0, eq));
    std::string value = text::trim(body.substr(eq + 1));
    if (key.empty()) fail(where, "empty key");
    apply_config_key(config, key, value, where);
  }

  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && !fs::path(p).is_absolute()) p = (base / p).string();
  };
  resolve(config.manifest);
  resolve(config.out_dir);
  return config;
}

void RunConfig::validate() const {
  hp.validate();
  if (k_list.empty()) throw ValidationError("k_list must not be empty");
  for (std::size_t k : k_list)
    if (k == 0) throw ValidationError("k_list entries must be positive");
  if (epsilon_sweep.empty()) throw ValidationError("epsilon_sweep must not be empty");
  for (double e : epsilon_sweep)
    if (!(e > 0.0 && e < 1.0))
      throw ValidationError("epsilon_sweep values must lie strictly between 0 and 1");
}

}  // namespace mvad
