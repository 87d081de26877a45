#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvad/graph.hpp"

namespace mvad {

enum class TargetViews { all, random_one, named };

struct InjectionSpec {
  std::size_t clique_size = 6;        // q, nodes per planted clique
  std::size_t n_cliques = 25;         // p
  std::size_t n_attr_anomalies = 150;
  std::size_t candidate_pool = 50;    // k, candidates per attribute swap
  TargetViews target_mode = TargetViews::all;
  std::vector<std::string> view_names;  // for TargetViews::named
  std::uint64_t seed = 1;

  std::size_t total_anomalies() const { return n_cliques * clique_size + n_attr_anomalies; }
  void validate(const MultiViewNetwork& network) const;
};

enum class Mechanism : unsigned char { none = 0, structural = 1, attribute = 2 };

struct GroundTruth {
  std::vector<unsigned char> anomalous;  // length n
  std::vector<Mechanism> mechanism;      // length n

  std::size_t count() const;
  std::vector<std::size_t> anomalous_ids() const;  // ascending
};

// Plants p cliques of q fresh nodes each (all pairwise edges added in every
// target view) and swaps the attribute rows of n_attr_anomalies further nodes
// with their farthest candidate by Euclidean distance. The two mechanisms
// select disjoint node sets. Deterministic in spec.seed.
std::pair<MultiViewNetwork, GroundTruth> inject(const MultiViewNetwork& network,
                                                const InjectionSpec& spec);

}  // namespace mvad
