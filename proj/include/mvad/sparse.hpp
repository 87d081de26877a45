#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "mvad/dense.hpp"
#include "mvad/errors.hpp"

namespace mvad {

// CSR sparse matrix. Invariants, checked by validate():
//   row_offsets has n_rows+1 entries, non-decreasing, front 0, back nnz;
//   col_indices strictly increasing within each row and < n_cols;
//   values holds no explicit zeros.
struct SparseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  void validate() const {
    if (row_offsets.size() != n_rows + 1)
      throw ValidationError("sparse: row_offsets size must be n_rows+1");
    if (row_offsets.front() != 0 || row_offsets.back() != values.size())
      throw ValidationError("sparse: row_offsets must span [0, nnz]");
    if (col_indices.size() != values.size())
      throw ValidationError("sparse: col_indices/values length mismatch");
    for (std::size_t i = 0; i < n_rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1])
        throw ValidationError("sparse: row_offsets must be non-decreasing");
      for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
        if (col_indices[p] >= n_cols)
          throw ValidationError("sparse: column index out of range");
        if (p > row_offsets[i] && col_indices[p - 1] >= col_indices[p])
          throw ValidationError("sparse: column indices must be strictly increasing per row");
        if (values[p] == 0.0)
          throw ValidationError("sparse: explicit zero stored");
      }
    }
  }

  DenseMatrix densify() const {
    DenseMatrix m(n_rows, n_cols);
    for (std::size_t i = 0; i < n_rows; ++i)
      for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p)
        m(i, col_indices[p]) = values[p];
    return m;
  }

  // Value at (i, j) via binary search over the row. Zero when absent.
  double at(std::size_t i, std::size_t j) const {
    auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - col_indices.begin())];
  }
};

// Accumulates undirected edges into a deduplicated symmetric binary adjacency.
// Self loops are rejected; (i,j) and (j,i) collapse to one undirected edge.
class EdgeSetBuilder {
 public:
  explicit EdgeSetBuilder(std::size_t n_nodes) : n_(n_nodes) {}

  void add_edge(std::size_t i, std::size_t j) {
    if (i == j) throw ValidationError("edge list: self loop rejected");
    if (i >= n_ || j >= n_) throw ValidationError("edge list: node id out of range");
    if (i > j) std::swap(i, j);
    edges_.emplace(i, j);
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return edges_.count({i, j}) > 0;
  }

  std::size_t n_edges() const { return edges_.size(); }
  std::size_t n_nodes() const { return n_; }

  SparseMatrix build() const {
    SparseMatrix a;
    a.n_rows = n_;
    a.n_cols = n_;
    std::vector<std::size_t> degree(n_, 0);
    for (const auto& [i, j] : edges_) {
      ++degree[i];
      ++degree[j];
    }
    a.row_offsets.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) a.row_offsets[i + 1] = a.row_offsets[i] + degree[i];
    a.col_indices.resize(a.row_offsets.back());
    a.values.assign(a.row_offsets.back(), 1.0);
    std::vector<std::size_t> cursor(a.row_offsets.begin(), a.row_offsets.end() - 1);
    // std::set iterates in (i,j) order, so per-row columns come out sorted for
    // the i side; the j side needs a final per-row sort.
    for (const auto& [i, j] : edges_) {
      a.col_indices[cursor[i]++] = j;
      a.col_indices[cursor[j]++] = i;
    }
    for (std::size_t i = 0; i < n_; ++i)
      std::sort(a.col_indices.begin() + static_cast<std::ptrdiff_t>(a.row_offsets[i]),
                a.col_indices.begin() + static_cast<std::ptrdiff_t>(a.row_offsets[i + 1]));
    return a;
  }

 private:
  std::size_t n_;
  std::set<std::pair<std::size_t, std::size_t>> edges_;
};

}  // namespace mvad
