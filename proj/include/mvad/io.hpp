#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mvad/graph.hpp"

namespace mvad {

// Dataset manifest: line-oriented key/value with [view.<name>] sections.
//   attributes = <csv path>        required, node count = its row count
//   labels = <text path>           optional display names, one per line
//   [view.<name>]
//   edges = <edge file path>       one section per view, in file order
// Paths are relative to the manifest's directory. A '#' at line start or
// preceded by whitespace begins a comment.
MultiViewNetwork load_network(const std::string& manifest_path);

// Writes manifest.txt, attributes.csv and view_<name>.edges under dir;
// returns the manifest path.
std::string save_network(const std::string& dir, const MultiViewNetwork& network);

// Edge file: two whitespace-separated 0-based node ids per line. Duplicates
// and reversed duplicates merge; "i i" lines are rejected.
SparseMatrix load_edge_file(const std::string& path, std::size_t n_nodes);
void save_edge_file(const std::string& path, const SparseMatrix& adjacency);

// CSV of n rows and d numeric columns; a header row is auto-detected when any
// cell of the first row fails numeric parsing.
DenseMatrix load_attributes_csv(const std::string& path);
void save_attributes_csv(const std::string& path, const DenseMatrix& attributes);

// One anomalous node id per line, ascending.
std::vector<std::size_t> load_ground_truth(const std::string& path, std::size_t n_nodes);
void save_ground_truth(const std::string& path, const std::vector<std::size_t>& anomalous_ids);

struct ScoreRow {
  std::size_t node_id;
  double score;
  std::size_t rank;  // 1-based, 1 = highest score
};

// CSV with header "node_id,score,rank", sorted by rank ascending.
std::vector<ScoreRow> load_scores_csv(const std::string& path);
void save_scores_csv(const std::string& path, const std::vector<double>& scores);

// Shortest-exact decimal rendering used by every text writer.
std::string format_double(double v);

// Write with a temp-file rename so failed runs never leave partial artifacts.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mvad
