#include "mvad/inject.hpp"

#include <algorithm>
#include <cmath>

#include "mvad/errors.hpp"
#include "mvad/rng.hpp"

namespace mvad {

void InjectionSpec::validate(const MultiViewNetwork& network) const {
  if (clique_size < 2)
    throw ValidationError("injection: clique_size must be >= 2");
  if (n_cliques > 0 && clique_size > network.n)
    throw ValidationError("injection: clique_size exceeds node count");
  if (total_anomalies() > network.n)
    throw ValidationError("injection: total anomalies exceed node count");
  if (n_attr_anomalies > 0 && candidate_pool < 1)
    throw ValidationError("injection: candidate_pool must be >= 1");
  if (n_attr_anomalies > 0 && candidate_pool > network.n - 1)
    throw ValidationError("injection: candidate_pool exceeds other-node count");
  if (target_mode == TargetViews::named) {
    if (view_names.empty())
      throw ValidationError("injection: named target mode lists no views");
    for (const std::string& name : view_names) network.view(name);  // throws if unknown
  }
}

std::size_t GroundTruth::count() const {
  std::size_t c = 0;
  for (unsigned char a : anomalous) c += a ? 1 : 0;
  return c;
}

std::vector<std::size_t> GroundTruth::anomalous_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < anomalous.size(); ++i)
    if (anomalous[i]) ids.push_back(i);
  return ids;
}

namespace {

std::vector<std::size_t> view_indices_for(const MultiViewNetwork& network,
                                          const InjectionSpec& spec, Rng& rng) {
  switch (spec.target_mode) {
    case TargetViews::all: {
      std::vector<std::size_t> all(network.n_views());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      return all;
    }
    case TargetViews::random_one:
      return {static_cast<std::size_t>(rng.uniform_below(network.n_views()))};
    case TargetViews::named: {
      std::vector<std::size_t> out;
      for (const std::string& name : spec.view_names)
        for (std::size_t i = 0; i < network.n_views(); ++i)
          if (network.views[i].view_name == name) out.push_back(i);
      return out;
    }
  }
  throw ValidationError("injection: bad target mode");
}

double row_distance_sq(const DenseMatrix& x, std::size_t a, std::size_t b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.n_cols(); ++j) {
    const double dd = x(a, j) - x(b, j);
    acc += dd * dd;
  }
  return acc;
}

}  // namespace

std::pair<MultiViewNetwork, GroundTruth> inject(const MultiViewNetwork& network,
                                                const InjectionSpec& spec) {
  network.validate();
  spec.validate(network);

  const std::size_t n = network.n;
  MultiViewNetwork out = network;
  GroundTruth truth;
  truth.anomalous.assign(n, 0);
  truth.mechanism.assign(n, Mechanism::none);

  SeedStreams streams(spec.seed);
  Rng structural_rng = streams.stream("injection");
  Rng candidate_rng = streams.stream("candidates");

  // Structural: one draw of p*q distinct nodes, consecutive q per clique.
  const std::size_t n_structural = spec.n_cliques * spec.clique_size;
  const std::vector<std::size_t> clique_nodes =
      structural_rng.sample_without_replacement(n, n_structural);
  std::vector<EdgeSetBuilder> builders;
  for (const ViewGraph& v : out.views) {
    EdgeSetBuilder b(n);
    for (std::size_t i = 0; i < v.adjacency.n_rows; ++i)
      for (std::size_t p = v.adjacency.row_offsets[i]; p < v.adjacency.row_offsets[i + 1]; ++p)
        if (i < v.adjacency.col_indices[p]) b.add_edge(i, v.adjacency.col_indices[p]);
    builders.push_back(std::move(b));
  }
  std::vector<bool> view_touched(out.n_views(), false);
  for (std::size_t c = 0; c < spec.n_cliques; ++c) {
    const std::size_t base = c * spec.clique_size;
    const std::vector<std::size_t> targets = view_indices_for(network, spec, structural_rng);
    for (std::size_t vi : targets) view_touched[vi] = true;
    for (std::size_t a = 0; a < spec.clique_size; ++a) {
      truth.anomalous[clique_nodes[base + a]] = 1;
      truth.mechanism[clique_nodes[base + a]] = Mechanism::structural;
      for (std::size_t b = a + 1; b < spec.clique_size; ++b)
        for (std::size_t vi : targets)
          builders[vi].add_edge(clique_nodes[base + a], clique_nodes[base + b]);
    }
  }
  for (std::size_t vi = 0; vi < out.n_views(); ++vi) {
    if (!view_touched[vi]) continue;
    out.views[vi].adjacency = builders[vi].build();
    out.views[vi].normalized.reset();
    out.views[vi].ensure_normalized();
  }

  // Attribute: swap targets drawn from the nodes the cliques did not touch.
  std::vector<std::size_t> clean;
  for (std::size_t i = 0; i < n; ++i)
    if (!truth.anomalous[i]) clean.push_back(i);
  const std::vector<std::size_t> picks =
      candidate_rng.sample_without_replacement(clean.size(), spec.n_attr_anomalies);
  for (std::size_t pick : picks) {
    const std::size_t node = clean[pick];
    truth.anomalous[node] = 1;
    truth.mechanism[node] = Mechanism::attribute;
    // candidate_pool distinct candidates among the other n-1 nodes; indices
    // at or above `node` shift up by one to skip it
    const std::vector<std::size_t> raw =
        candidate_rng.sample_without_replacement(n - 1, spec.candidate_pool);
    std::size_t best = n;  // sentinel
    double best_dist = -1.0;
    for (std::size_t r : raw) {
      const std::size_t cand = r >= node ? r + 1 : r;
      const double dist = row_distance_sq(out.attributes, node, cand);
      // ties broken toward the smallest candidate index
      if (dist > best_dist || (dist == best_dist && cand < best)) {
        best = cand;
        best_dist = dist;
      }
    }
    for (std::size_t j = 0; j < out.d; ++j) out.attributes(node, j) = out.attributes(best, j);
  }

  out.validate();
  return {std::move(out), std::move(truth)};
}

}  // namespace mvad
