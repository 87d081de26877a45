#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvad/inject.hpp"
#include "mvad/model.hpp"

namespace mvad {

// One declarative settings block shared by every command. A config file holds
// "key = value" lines ('#' comments as in manifests); CLI flags re-apply the
// same keys afterwards, so flags win over file values.
//
// Keys: manifest, out_dir, seed, epochs, learning_rate, epsilon, embed_dim,
// attn_dim, layers, fusion, encoder, activation, block_rows, clique_size,
// n_cliques, n_attr_anomalies, candidate_pool, target_views (all | random-one
// | comma list of view names), k_list, epsilon_sweep.
struct RunConfig {
  std::string manifest;
  std::string out_dir = ".";
  HyperParams hp;
  InjectionSpec injection;
  std::vector<std::size_t> k_list = {50, 150, 300};
  std::vector<double> epsilon_sweep = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  // One master seed drives the named streams of every consumer.
  void set_seed(std::uint64_t seed) {
    hp.seed = seed;
    injection.seed = seed;
  }

  void validate() const;
};

// where identifies the source in error messages ("file:line" or "--flag").
void apply_config_key(RunConfig& config, const std::string& key, const std::string& value,
                      const std::string& where);

// Relative manifest/out_dir values resolve against the config file's
// directory.
RunConfig load_run_config(const std::string& path);

}  // namespace mvad
