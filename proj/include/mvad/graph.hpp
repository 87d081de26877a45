#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvad/dense.hpp"
#include "mvad/sparse.hpp"

namespace mvad {

// One interaction relation over the shared node set. adjacency is binary,
// symmetric, with an empty diagonal; normalized caches
// D^{-1/2} (A + I) D^{-1/2} for the self-looped degree D.
struct ViewGraph {
  std::string view_name;
  SparseMatrix adjacency;
  std::optional<SparseMatrix> normalized;

  const SparseMatrix& norm() const;  // throws if not yet normalized
  void ensure_normalized();
  void validate() const;
};

struct MultiViewNetwork {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<ViewGraph> views;
  DenseMatrix attributes;               // n x d
  std::vector<std::string> node_labels;  // optional display names, empty or length n

  std::size_t n_views() const { return views.size(); }
  const ViewGraph& view(const std::string& name) const;
  void validate() const;
};

// Self-looped symmetric normalization: entry (i,j) of A+I divided by
// sqrt((1+deg_i)(1+deg_j)). Output pattern = input pattern plus diagonal.
SparseMatrix normalize(const SparseMatrix& adjacency);

// Element-wise OR of all view adjacencies.
SparseMatrix union_adjacency(const MultiViewNetwork& network);

// User-user adjacency from user-item interactions: (i,j)=1 iff i != j and
// users i, j interacted with at least one common item. Item ids are arbitrary
// and dropped from the result.
SparseMatrix project_bipartite(
    const std::vector<std::pair<std::size_t, std::size_t>>& interactions,
    std::size_t n_users);

}  // namespace mvad
