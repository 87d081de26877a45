#include "mvad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mvad/errors.hpp"

namespace mvad {

const SparseMatrix& ViewGraph::norm() const {
  if (!normalized) throw ValidationError("view '" + view_name + "': normalized matrix missing");
  return *normalized;
}

void ViewGraph::ensure_normalized() {
  if (!normalized) normalized = normalize(adjacency);
}

void ViewGraph::validate() const {
  adjacency.validate();
  if (adjacency.n_rows != adjacency.n_cols)
    throw ValidationError("view '" + view_name + "': adjacency not square");
  for (std::size_t i = 0; i < adjacency.n_rows; ++i) {
    for (std::size_t p = adjacency.row_offsets[i]; p < adjacency.row_offsets[i + 1]; ++p) {
      const std::size_t j = adjacency.col_indices[p];
      if (i == j)
        throw ValidationError("view '" + view_name + "': adjacency has a self-loop");
      if (adjacency.values[p] != 1.0)
        throw ValidationError("view '" + view_name + "': adjacency not binary");
      if (adjacency.at(j, i) != 1.0)
        throw ValidationError("view '" + view_name + "': adjacency not symmetric");
    }
  }
  if (normalized) {
    normalized->validate();
    if (normalized->n_rows != adjacency.n_rows)
      throw ValidationError("view '" + view_name + "': normalized size differs");
  }
}

const ViewGraph& MultiViewNetwork::view(const std::string& name) const {
  for (const ViewGraph& v : views)
    if (v.view_name == name) return v;
  throw ValidationError("unknown view '" + name + "'");
}

void MultiViewNetwork::validate() const {
  if (views.empty()) throw ValidationError("network declares zero views");
  for (const ViewGraph& v : views) {
    v.validate();
    if (v.adjacency.n_rows != n)
      throw ValidationError("view '" + v.view_name + "': node count differs from network");
  }
  if (attributes.n_rows() != n || attributes.n_cols() != d)
    throw ValidationError("attribute matrix shape differs from declared n x d");
  if (!attributes.all_finite())
    throw ValidationError("attribute matrix contains non-finite entries");
  if (!node_labels.empty() && node_labels.size() != n)
    throw ValidationError("node label count differs from n");
}

SparseMatrix normalize(const SparseMatrix& adjacency) {
  if (adjacency.n_rows != adjacency.n_cols)
    throw ValidationError("normalize: adjacency must be square");
  const std::size_t n = adjacency.n_rows;
  // Self-looped degrees; the entry (i, j) divides by sqrt(deg_i * deg_j) in
  // one correctly-rounded step so values like 1/sqrt(4) come out exact.
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i)
    deg[i] = static_cast<double>(adjacency.row_offsets[i + 1] - adjacency.row_offsets[i] + 1);
  SparseMatrix out;
  out.n_rows = n;
  out.n_cols = n;
  out.row_offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t deg = adjacency.row_offsets[i + 1] - adjacency.row_offsets[i];
    out.row_offsets[i + 1] = out.row_offsets[i] + deg + 1;  // plus the self-loop
  }
  out.col_indices.resize(out.row_offsets.back());
  out.values.resize(out.row_offsets.back());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = out.row_offsets[i];
    bool diag_done = false;
    for (std::size_t p = adjacency.row_offsets[i]; p < adjacency.row_offsets[i + 1]; ++p) {
      const std::size_t j = adjacency.col_indices[p];
      if (!diag_done && j > i) {
        out.col_indices[w] = i;
        out.values[w] = 1.0 / deg[i];
        ++w;
        diag_done = true;
      }
      out.col_indices[w] = j;
      out.values[w] = 1.0 / std::sqrt(deg[i] * deg[j]);
      ++w;
    }
    if (!diag_done) {
      out.col_indices[w] = i;
      out.values[w] = 1.0 / deg[i];
      ++w;
    }
  }
  out.validate();
  return out;
}

SparseMatrix union_adjacency(const MultiViewNetwork& network) {
  if (network.views.empty()) throw ValidationError("union_adjacency: network has no views");
  EdgeSetBuilder builder(network.n);
  for (const ViewGraph& v : network.views)
    for (std::size_t i = 0; i < v.adjacency.n_rows; ++i)
      for (std::size_t p = v.adjacency.row_offsets[i]; p < v.adjacency.row_offsets[i + 1]; ++p) {
        const std::size_t j = v.adjacency.col_indices[p];
        if (i < j) builder.add_edge(i, j);
      }
  return builder.build();
}

SparseMatrix project_bipartite(
    const std::vector<std::pair<std::size_t, std::size_t>>& interactions,
    std::size_t n_users) {
  std::map<std::size_t, std::set<std::size_t>> users_of_item;
  for (const auto& [user, item] : interactions) {
    if (user >= n_users)
      throw ValidationError("project_bipartite: user id out of range");
    users_of_item[item].insert(user);
  }
  EdgeSetBuilder builder(n_users);
  for (const auto& [item, users] : users_of_item) {
    (void)item;
    for (auto it = users.begin(); it != users.end(); ++it) {
      auto jt = it;
      for (++jt; jt != users.end(); ++jt) builder.add_edge(*it, *jt);
    }
  }
  return builder.build();
}

}  // namespace mvad
