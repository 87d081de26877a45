#include "mvad/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mvad/errors.hpp"
#include "mvad/text.hpp"

namespace fs = std::filesystem;

namespace mvad {

namespace {

using text::parse_double;
using text::parse_size;
using text::split_csv;
using text::split_ws;
using text::strip_comment;
using text::trim;

[[noreturn]] void fail_at(const std::string& path, std::size_t lineno, const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(lineno) + ": " + msg);
}

std::string resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base / path).string();
}

void check_view_name(const std::string& name, const std::string& where) {
  if (name.empty()) throw ValidationError(where + ": empty view name");
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
      throw ValidationError(where + ": view name '" + name +
                            "' may only contain letters, digits, '_', '-', '.'");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::vector<std::string> load_label_file(const std::string& path, std::size_t n) {
  std::ifstream in = open_input(path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) labels.push_back(trim(line));
  while (!labels.empty() && labels.back().empty()) labels.pop_back();
  if (labels.size() != n)
    throw ValidationError(path + ": " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(n) + " nodes");
  return labels;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SparseMatrix load_edge_file(const std::string& path, std::size_t n_nodes) {
  std::ifstream in = open_input(path);
  EdgeSetBuilder builder(n_nodes);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::vector<std::string> toks = split_ws(body);
    if (toks.size() != 2) fail_at(path, lineno, "expected two node ids, got '" + body + "'");
    std::size_t i, j;
    if (!parse_size(toks[0], i) || !parse_size(toks[1], j))
      fail_at(path, lineno, "non-integer node id in '" + body + "'");
    if (i == j)
      fail_at(path, lineno,
              "self-loop '" + body + "' not allowed; normalization adds self-loops itself");
    if (i >= n_nodes || j >= n_nodes) fail_at(path, lineno, "node id out of range");
    builder.add_edge(i, j);
  }
  return builder.build();
}

void save_edge_file(const std::string& path, const SparseMatrix& adjacency) {
  std::string out;
  for (std::size_t i = 0; i < adjacency.n_rows; ++i)
    for (std::size_t p = adjacency.row_offsets[i]; p < adjacency.row_offsets[i + 1]; ++p) {
      const std::size_t j = adjacency.col_indices[p];
      if (i < j) out += std::to_string(i) + " " + std::to_string(j) + "\n";
    }
  write_text_file(path, out);
}

DenseMatrix load_attributes_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  std::size_t d = 0;
  bool first_content_row = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    std::vector<double> row(cells.size());
    bool all_numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (cells[c].empty() || !parse_double(cells[c], row[c])) {
        all_numeric = false;
        if (!first_content_row)
          fail_at(path, lineno, "non-numeric attribute cell '" + cells[c] + "'");
        break;
      }
    if (first_content_row) {
      first_content_row = false;
      if (!all_numeric) continue;  // header row
      d = cells.size();
    } else if (cells.size() != d && d != 0) {
      fail_at(path, lineno, "row has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(d));
    }
    if (d == 0) d = cells.size();
    if (cells.size() != d)
      fail_at(path, lineno, "row has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(d));
    for (std::size_t c = 0; c < d; ++c)
      if (!std::isfinite(row[c])) fail_at(path, lineno, "non-finite attribute value");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path + ": no attribute rows");
  DenseMatrix m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = rows[i][j];
  return m;
}

void save_attributes_csv(const std::string& path, const DenseMatrix& attributes) {
  std::string out;
  for (std::size_t i = 0; i < attributes.n_rows(); ++i) {
    for (std::size_t j = 0; j < attributes.n_cols(); ++j) {
      if (j) out += ",";
      out += format_double(attributes(i, j));
    }
    out += "\n";
  }
  write_text_file(path, out);
}

MultiViewNetwork load_network(const std::string& manifest_path) {
  std::ifstream in = open_input(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  std::string attr_path, labels_path;
  std::vector<std::pair<std::string, std::string>> view_files;  // name, edges path
  bool in_view = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 8 || body.substr(1, 5) != "view.")
        fail_at(manifest_path, lineno, "expected section header [view.<name>]");
      const std::string name = body.substr(6, body.size() - 7);
      check_view_name(name, manifest_path + ":" + std::to_string(lineno));
      for (const auto& [existing, p] : view_files)
        if (existing == name) fail_at(manifest_path, lineno, "duplicate view '" + name + "'");
      view_files.emplace_back(name, "");
      in_view = true;
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      fail_at(manifest_path, lineno, "expected 'key = value', got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (value.empty()) fail_at(manifest_path, lineno, "empty value for key '" + key + "'");
    if (in_view) {
      if (key != "edges")
        fail_at(manifest_path, lineno, "unknown key '" + key + "' in view section");
      if (!view_files.back().second.empty())
        fail_at(manifest_path, lineno, "duplicate 'edges' in view section");
      view_files.back().second = value;
    } else if (key == "attributes") {
      if (!attr_path.empty()) fail_at(manifest_path, lineno, "duplicate 'attributes' key");
      attr_path = value;
    } else if (key == "labels") {
      if (!labels_path.empty()) fail_at(manifest_path, lineno, "duplicate 'labels' key");
      labels_path = value;
    } else {
      fail_at(manifest_path, lineno, "unknown key '" + key + "'");
    }
  }
  if (attr_path.empty())
    throw ValidationError(manifest_path + ": manifest declares no attributes file");
  if (view_files.empty())
    throw ValidationError(manifest_path + ": manifest declares zero views");
  for (const auto& [name, p] : view_files)
    if (p.empty())
      throw ValidationError(manifest_path + ": view '" + name + "' declares no edges file");

  MultiViewNetwork net;
  net.attributes = load_attributes_csv(resolve(base, attr_path));
  net.n = net.attributes.n_rows();
  net.d = net.attributes.n_cols();
  if (!labels_path.empty())
    net.node_labels = load_label_file(resolve(base, labels_path), net.n);
  for (const auto& [name, p] : view_files) {
    ViewGraph v;
    v.view_name = name;
    v.adjacency = load_edge_file(resolve(base, p), net.n);
    v.ensure_normalized();
    net.views.push_back(std::move(v));
  }
  net.validate();
  return net;
}

std::string save_network(const std::string& dir, const MultiViewNetwork& network) {
  network.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());

  save_attributes_csv((fs::path(dir) / "attributes.csv").string(), network.attributes);
  std::string manifest = "# multi-view dataset\nattributes = attributes.csv\n";
  if (!network.node_labels.empty()) {
    std::string labels;
    for (const std::string& l : network.node_labels) labels += l + "\n";
    write_text_file((fs::path(dir) / "labels.txt").string(), labels);
    manifest += "labels = labels.txt\n";
  }
  for (const ViewGraph& v : network.views) {
    check_view_name(v.view_name, "save_network");
    const std::string fname = "view_" + v.view_name + ".edges";
    save_edge_file((fs::path(dir) / fname).string(), v.adjacency);
    manifest += "[view." + v.view_name + "]\nedges = " + fname + "\n";
  }
  const std::string mpath = (fs::path(dir) / "manifest.txt").string();
  write_text_file(mpath, manifest);
  return mpath;
}

std::vector<std::size_t> load_ground_truth(const std::string& path, std::size_t n_nodes) {
  std::ifstream in = open_input(path);
  std::vector<std::size_t> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    std::size_t id;
    if (!parse_size(body, id)) fail_at(path, lineno, "non-integer node id '" + body + "'");
    if (id >= n_nodes) fail_at(path, lineno, "node id out of range");
    ids.push_back(id);
  }
  std::vector<std::size_t> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError(path + ": duplicate node id in ground truth");
  return ids;
}

void save_ground_truth(const std::string& path, const std::vector<std::size_t>& anomalous_ids) {
  std::vector<std::size_t> ids = anomalous_ids;
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (std::size_t id : ids) out += std::to_string(id) + "\n";
  write_text_file(path, out);
}

std::vector<ScoreRow> load_scores_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "node_id,score,rank")
    throw ValidationError(path + ": expected header 'node_id,score,rank'");
  std::vector<ScoreRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != 3) fail_at(path, lineno, "expected 3 columns");
    ScoreRow r;
    if (!parse_size(cells[0], r.node_id)) fail_at(path, lineno, "bad node_id");
    if (!parse_double(cells[1], r.score)) fail_at(path, lineno, "bad score");
    if (!parse_size(cells[2], r.rank)) fail_at(path, lineno, "bad rank");
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError(path + ": no score rows");
  std::vector<unsigned char> seen(rows.size(), 0);
  std::vector<unsigned char> rank_seen(rows.size(), 0);
  for (const ScoreRow& r : rows) {
    if (r.node_id >= rows.size() || seen[r.node_id])
      throw ValidationError(path + ": node ids are not a permutation of 0.." +
                            std::to_string(rows.size() - 1));
    seen[r.node_id] = 1;
    if (r.rank == 0 || r.rank > rows.size() || rank_seen[r.rank - 1])
      throw ValidationError(path + ": ranks are not a permutation of 1.." +
                            std::to_string(rows.size()));
    rank_seen[r.rank - 1] = 1;
  }
  return rows;
}

void save_scores_csv(const std::string& path, const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::string out = "node_id,score,rank\n";
  for (std::size_t r = 0; r < order.size(); ++r)
    out += std::to_string(order[r]) + "," + format_double(scores[order[r]]) + "," +
           std::to_string(r + 1) + "\n";
  write_text_file(path, out);
}

}  // namespace mvad
