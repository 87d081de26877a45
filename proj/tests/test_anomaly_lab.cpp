#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <string>
#include <vector>

#include "mvad/errors.hpp"
#include "mvad/inject.hpp"
#include "mvad/io.hpp"
#include "mvad/metrics.hpp"
#include "mvad/rng.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace mvad;

namespace {

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b) {
  return a.row_offsets == b.row_offsets && a.col_indices == b.col_indices && a.values == b.values;
}

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), sizeof(double) * a.size()) == 0;
}

std::size_t nnz(const SparseMatrix& a) { return a.values.size(); }

// independent pairwise Mann-Whitney count, half a point per tie
double brute_auc(const std::vector<double>& scores, const std::vector<unsigned char>& labels) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t p = 0; p < scores.size(); ++p) {
    if (!labels[p]) continue;
    ++pos;
    for (std::size_t q = 0; q < scores.size(); ++q) {
      if (labels[q]) continue;
      if (scores[p] > scores[q]) wins += 1.0;
      else if (scores[p] == scores[q]) wins += 0.5;
    }
  }
  for (unsigned char l : labels) neg += l ? 0 : 1;
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// top-k membership without sorting: node i makes the cut when fewer than k
// nodes rank ahead of it (higher score, or equal score with a smaller index)
double brute_accuracy_at_k(const std::vector<double>& scores,
                           const std::vector<unsigned char>& labels, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (j == i) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++ahead;
    }
    if (ahead < k && labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace

TEST_CASE("a planted clique becomes fully connected in every view") {
  support::SyntheticSpec sspec;
  sspec.n = 30;
  sspec.n_views = 2;
  sspec.d = 5;
  MultiViewNetwork net = support::make_synthetic(sspec);

  InjectionSpec spec;
  spec.clique_size = 4;
  spec.n_cliques = 1;
  spec.n_attr_anomalies = 0;
  spec.seed = 7;
  auto [out, truth] = inject(net, spec);

  REQUIRE(truth.count() == 4);
  const std::vector<std::size_t> ids = truth.anomalous_ids();
  for (std::size_t id : ids) CHECK(truth.mechanism[id] == Mechanism::structural);

  for (const ViewGraph& v : out.views)
    for (std::size_t a : ids)
      for (std::size_t b : ids)
        if (a != b) CHECK(v.adjacency.at(a, b) == 1.0);

  // nothing else moves: attributes bitwise intact, only clique pairs added
  CHECK(bitwise_equal(out.attributes, net.attributes));
  for (std::size_t vi = 0; vi < net.n_views(); ++vi) {
    std::size_t added = 0;
    for (std::size_t i = 0; i < net.n; ++i)
      for (std::size_t j = i + 1; j < net.n; ++j) {
        const bool before = net.views[vi].adjacency.at(i, j) != 0.0;
        const bool after = out.views[vi].adjacency.at(i, j) != 0.0;
        const bool in_clique = std::count(ids.begin(), ids.end(), i) != 0 &&
                               std::count(ids.begin(), ids.end(), j) != 0;
        CHECK(after == (before || in_clique));
        if (after && !before) ++added;
      }
    CHECK(nnz(out.views[vi].adjacency) == nnz(net.views[vi].adjacency) + 2 * added);
    // the cached normalization follows the new pattern
    CHECK(out.views[vi].norm().at(ids[0], ids[1]) > 0.0);
  }
}

TEST_CASE("attribute targets copy the farthest row in the candidate pool") {
  Rng rng(5);
  MultiViewNetwork net = support::random_tiny_network(rng, 12, 1, 3);
  InjectionSpec spec;
  spec.n_cliques = 0;
  spec.n_attr_anomalies = 1;
  spec.candidate_pool = 11;  // every other node is a candidate
  spec.seed = 3;
  auto [out, truth] = inject(net, spec);

  REQUIRE(truth.count() == 1);
  const std::size_t node = truth.anomalous_ids()[0];
  CHECK(truth.mechanism[node] == Mechanism::attribute);
  for (std::size_t vi = 0; vi < net.n_views(); ++vi)
    CHECK(same_pattern(out.views[vi].adjacency, net.views[vi].adjacency));

  std::size_t changed = 0;
  for (std::size_t i = 0; i < net.n; ++i)
    if (std::memcmp(out.attributes.row(i), net.attributes.row(i), sizeof(double) * net.d) != 0)
      ++changed;
  CHECK(changed == 1);

  std::size_t best = net.n;
  double best_dist = -1.0;
  for (std::size_t j = 0; j < net.n; ++j) {
    if (j == node) continue;
    double dist = 0.0;
    for (std::size_t c = 0; c < net.d; ++c) {
      const double dd = net.attributes(node, c) - net.attributes(j, c);
      dist += dd * dd;
    }
    if (dist > best_dist || (dist == best_dist && j < best)) {
      best = j;
      best_dist = dist;
    }
  }
  CHECK(std::memcmp(out.attributes.row(node), net.attributes.row(best),
                    sizeof(double) * net.d) == 0);
}

TEST_CASE("identical rows everywhere still mark the target but change nothing") {
  Rng rng(6);
  MultiViewNetwork net = support::random_tiny_network(rng, 8, 1, 3);
  for (std::size_t i = 0; i < net.n; ++i)
    for (std::size_t j = 0; j < net.d; ++j) net.attributes(i, j) = 0.5;
  InjectionSpec spec;
  spec.n_cliques = 0;
  spec.n_attr_anomalies = 1;
  spec.candidate_pool = 4;
  auto [out, truth] = inject(net, spec);
  CHECK(truth.count() == 1);
  CHECK(bitwise_equal(out.attributes, net.attributes));
}

TEST_CASE("mechanisms pick disjoint nodes and ground truth adds up") {
  support::SyntheticSpec sspec;
  sspec.n = 60;
  sspec.n_views = 3;
  MultiViewNetwork net = support::make_synthetic(sspec);

  InjectionSpec spec;
  spec.clique_size = 4;
  spec.n_cliques = 2;
  spec.n_attr_anomalies = 10;
  spec.candidate_pool = 20;
  spec.seed = 11;
  CHECK(spec.total_anomalies() == 18);
  auto [out, truth] = inject(net, spec);

  CHECK(truth.count() == 18);
  std::size_t structural = 0, attribute = 0;
  for (std::size_t i = 0; i < net.n; ++i) {
    if (truth.mechanism[i] == Mechanism::structural) ++structural;
    if (truth.mechanism[i] == Mechanism::attribute) ++attribute;
    if (!truth.anomalous[i]) CHECK(truth.mechanism[i] == Mechanism::none);
  }
  CHECK(structural == 8);
  CHECK(attribute == 10);

  // new edges never leave the structural set
  for (std::size_t vi = 0; vi < net.n_views(); ++vi)
    for (std::size_t i = 0; i < net.n; ++i)
      for (std::size_t j = i + 1; j < net.n; ++j)
        if (out.views[vi].adjacency.at(i, j) != 0.0 && net.views[vi].adjacency.at(i, j) == 0.0) {
          CHECK(truth.mechanism[i] == Mechanism::structural);
          CHECK(truth.mechanism[j] == Mechanism::structural);
        }

  const std::vector<std::size_t> ids = truth.anomalous_ids();
  CHECK(std::is_sorted(ids.begin(), ids.end()));
  CHECK(ids.size() == 18);
}

TEST_CASE("injection is a pure function of the seed") {
  support::SyntheticSpec sspec;
  sspec.n = 40;
  sspec.n_views = 2;
  MultiViewNetwork net = support::make_synthetic(sspec);

  InjectionSpec spec;
  spec.clique_size = 3;
  spec.n_cliques = 1;
  spec.n_attr_anomalies = 3;
  spec.candidate_pool = 10;
  spec.seed = 21;

  auto [out1, truth1] = inject(net, spec);
  auto [out2, truth2] = inject(net, spec);
  CHECK(truth1.anomalous == truth2.anomalous);
  CHECK(bitwise_equal(out1.attributes, out2.attributes));
  for (std::size_t vi = 0; vi < net.n_views(); ++vi)
    CHECK(same_pattern(out1.views[vi].adjacency, out2.views[vi].adjacency));

  spec.seed = 22;
  auto [out3, truth3] = inject(net, spec);
  CHECK(truth1.anomalous != truth3.anomalous);
}

TEST_CASE("named target views confine clique edges to the listed views") {
  support::SyntheticSpec sspec;
  sspec.n = 25;
  sspec.n_views = 2;
  MultiViewNetwork net = support::make_synthetic(sspec);
  const std::string spared = net.views[0].view_name;
  const std::string hit = net.views[1].view_name;

  InjectionSpec spec;
  spec.clique_size = 3;
  spec.n_cliques = 1;
  spec.n_attr_anomalies = 0;
  spec.target_mode = TargetViews::named;
  spec.view_names = {hit};
  auto [out, truth] = inject(net, spec);

  CHECK(same_pattern(out.view(spared).adjacency, net.view(spared).adjacency));
  const std::vector<std::size_t> ids = truth.anomalous_ids();
  for (std::size_t a : ids)
    for (std::size_t b : ids)
      if (a != b) CHECK(out.view(hit).adjacency.at(a, b) == 1.0);
}

TEST_CASE("random-one target mode touches exactly one view per clique") {
  support::SyntheticSpec sspec;
  sspec.n = 25;
  sspec.n_views = 3;
  MultiViewNetwork net = support::make_synthetic(sspec);

  InjectionSpec spec;
  spec.clique_size = 3;
  spec.n_cliques = 1;
  spec.n_attr_anomalies = 0;
  spec.target_mode = TargetViews::random_one;
  spec.seed = 4;
  auto [out, truth] = inject(net, spec);

  std::size_t views_changed = 0;
  for (std::size_t vi = 0; vi < net.n_views(); ++vi)
    if (!same_pattern(out.views[vi].adjacency, net.views[vi].adjacency)) ++views_changed;
  CHECK(views_changed == 1);
}

TEST_CASE("injection specs are validated against the network") {
  Rng rng(8);
  MultiViewNetwork net = support::random_tiny_network(rng, 10, 2, 3);

  InjectionSpec bad;
  bad.clique_size = 1;
  CHECK_THROWS_AS(bad.validate(net), ValidationError);

  bad = InjectionSpec{};
  bad.clique_size = 11;
  bad.n_cliques = 1;
  bad.n_attr_anomalies = 0;
  CHECK_THROWS_AS(bad.validate(net), ValidationError);

  bad = InjectionSpec{};
  bad.clique_size = 3;
  bad.n_cliques = 3;
  bad.n_attr_anomalies = 2;  // 11 > 10 nodes
  CHECK_THROWS_AS(bad.validate(net), ValidationError);

  bad = InjectionSpec{};
  bad.n_cliques = 0;
  bad.n_attr_anomalies = 1;
  bad.candidate_pool = 10;  // only 9 other nodes
  CHECK_THROWS_AS(bad.validate(net), ValidationError);

  bad = InjectionSpec{};
  bad.target_mode = TargetViews::named;
  bad.view_names = {};
  CHECK_THROWS_AS(bad.validate(net), ValidationError);
  bad.view_names = {"no-such-view"};
  CHECK_THROWS_AS(bad.validate(net), ValidationError);

  InjectionSpec good;
  good.clique_size = 2;
  good.n_cliques = 2;
  good.n_attr_anomalies = 2;
  good.candidate_pool = 5;
  good.validate(net);
}

TEST_CASE("accuracy at k rewards perfect rankings and punishes inverted ones") {
  const std::vector<double> scores = {0.9, 0.8, 0.3, 0.2, 0.1};
  const std::vector<unsigned char> labels = {1, 1, 0, 0, 0};
  CHECK(accuracy_at_k(scores, labels, 1) == 1.0);
  CHECK(accuracy_at_k(scores, labels, 2) == 1.0);
  CHECK(accuracy_at_k(scores, labels, 5) == doctest::Approx(0.4));

  std::vector<unsigned char> inverted = {0, 0, 1, 1, 1};
  CHECK(accuracy_at_k(scores, inverted, 2) == 0.0);

  CHECK_THROWS_AS(accuracy_at_k(scores, labels, 0), ValidationError);
  CHECK_THROWS_AS(accuracy_at_k(scores, labels, 6), ValidationError);
  CHECK_THROWS_AS(accuracy_at_k({0.1}, {1, 0}, 1), ValidationError);

  // ties resolve toward the smaller node index
  CHECK(accuracy_at_k({0.5, 0.5}, {0, 1}, 1) == 0.0);
  CHECK(accuracy_at_k({0.5, 0.5}, {1, 0}, 1) == 1.0);
}

TEST_CASE("auc on the 6-element hand case is exactly 7/8") {
  // two positives at 0.9 and 0.4 against negatives 0.8, 0.3, 0.2, 0.1:
  // only the (0.4, 0.8) pair is misordered, so 7 of 8 pairs count
  const std::vector<double> scores = {0.9, 0.4, 0.8, 0.3, 0.2, 0.1};
  const std::vector<unsigned char> labels = {1, 1, 0, 0, 0, 0};
  AucResult res = auc_roc(scores, labels);
  CHECK(res.auc == 0.875);
  CHECK(res.auc == brute_auc(scores, labels));
}

TEST_CASE("auc hits the trivial anchors") {
  CHECK(auc_roc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}).auc == 1.0);
  CHECK(auc_roc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}).auc == 0.0);
  CHECK(auc_roc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}).auc == 0.5);
  CHECK(auc_roc({0.7, 0.7}, {1, 0}).auc == 0.5);
  CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {1, 1}), ValidationError);
  CHECK_THROWS_AS(auc_roc({0.1, 0.2}, {0, 0}), ValidationError);
  CHECK_THROWS_AS(auc_roc(std::vector<double>{}, std::vector<unsigned char>{}), ValidationError);
}

TEST_CASE("auc equals brute-force pairwise counting on exhaustive small sets") {
  Rng rng(13);
  const double alphabet[4] = {0.0, 0.25, 0.5, 0.75};
  for (std::size_t n = 2; n <= 6; ++n) {
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
      std::vector<unsigned char> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
      std::vector<double> scores(n);
      for (int rep = 0; rep < 3; ++rep) {
        for (double& s : scores) s = alphabet[rng.uniform_below(4)];
        CHECK(auc_roc(scores, labels).auc == brute_auc(scores, labels));
      }
    }
  }
  // larger random spot checks up to the full small-set range
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 7 + rng.uniform_below(6);  // 7..12
    std::vector<double> scores(n);
    std::vector<unsigned char> labels(n);
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = alphabet[rng.uniform_below(4)];
      labels[i] = rng.uniform_below(2) ? 1 : 0;
      (labels[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    CHECK(auc_roc(scores, labels).auc == brute_auc(scores, labels));
  }
}

TEST_CASE("accuracy at k equals the count-ahead formulation everywhere") {
  Rng rng(17);
  const double alphabet[4] = {0.0, 0.25, 0.5, 0.75};
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.uniform_below(11);  // 2..12
    std::vector<double> scores(n);
    std::vector<unsigned char> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = alphabet[rng.uniform_below(4)];
      labels[i] = rng.uniform_below(2) ? 1 : 0;
    }
    for (std::size_t k = 1; k <= n; ++k)
      CHECK(accuracy_at_k(scores, labels, k) == brute_accuracy_at_k(scores, labels, k));
  }
}

TEST_CASE("score negation flips auc around one half") {
  Rng rng(19);
  const double alphabet[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 3 + rng.uniform_below(8);
    std::vector<double> scores(n), neg(n);
    std::vector<unsigned char> labels(n);
    bool haspos = false, hasneg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = alphabet[rng.uniform_below(5)];
      neg[i] = -scores[i];
      labels[i] = rng.uniform_below(2) ? 1 : 0;
      (labels[i] ? haspos : hasneg) = true;
    }
    if (!haspos || !hasneg) continue;
    const double sum = auc_roc(scores, labels).auc + auc_roc(neg, labels).auc;
    CHECK(std::fabs(sum - 1.0) <= 1e-15);
  }
}

TEST_CASE("trapezoid integration of the roc curve reproduces the rank auc") {
  Rng rng(23);
  const double alphabet[4] = {0.0, 0.25, 0.5, 0.75};
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 4 + rng.uniform_below(20);
    std::vector<double> scores(n);
    std::vector<unsigned char> labels(n);
    bool haspos = false, hasneg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = alphabet[rng.uniform_below(4)];
      labels[i] = rng.uniform_below(2) ? 1 : 0;
      (labels[i] ? haspos : hasneg) = true;
    }
    if (!haspos || !hasneg) continue;
    AucResult res = auc_roc(scores, labels);

    REQUIRE(res.roc.size() >= 2);
    CHECK(res.roc.front().fpr == 0.0);
    CHECK(res.roc.front().tpr == 0.0);
    CHECK(res.roc.back().fpr == 1.0);
    CHECK(res.roc.back().tpr == 1.0);
    double integral = 0.0;
    for (std::size_t i = 1; i < res.roc.size(); ++i) {
      CHECK(res.roc[i].fpr >= res.roc[i - 1].fpr);
      CHECK(res.roc[i].tpr >= res.roc[i - 1].tpr);
      integral += (res.roc[i].fpr - res.roc[i - 1].fpr) * 0.5 *
                  (res.roc[i].tpr + res.roc[i - 1].tpr);
    }
    CHECK(std::fabs(integral - res.auc) <= 1e-9);
  }
}

TEST_CASE("evaluate bundles the metrics and serializes them") {
  support::TempDir tmp;
  const std::vector<double> scores = {0.9, 0.4, 0.8, 0.3, 0.2, 0.1};
  const std::vector<unsigned char> labels = {1, 1, 0, 0, 0, 0};
  MetricsReport report = evaluate(scores, labels, {1, 2, 4});

  REQUIRE(report.accuracy.size() == 3);
  CHECK(report.accuracy[0].first == 1);
  CHECK(report.accuracy[0].second == 1.0);
  CHECK(report.accuracy[1].second == 0.5);  // top-2 is {0.9, 0.8}
  CHECK(report.accuracy[2].second == 0.5);
  CHECK(report.auc == 0.875);
  CHECK(report.n == 6);
  CHECK(report.positives == 2);

  save_metrics_json(tmp.path("metrics.json"), report);
  nlohmann::json j = nlohmann::json::parse(read_text_file(tmp.path("metrics.json")));
  CHECK(j["accuracy_at_k"]["1"] == 1.0);
  CHECK(j["accuracy_at_k"]["4"] == 0.5);
  CHECK(j["auc"] == 0.875);
  CHECK(j["counts"]["nodes"] == 6);
  CHECK(j["counts"]["positives"] == 2);

  AucResult res = auc_roc(scores, labels);
  save_roc_tsv(tmp.path("roc.tsv"), res.roc);
  const std::string text = read_text_file(tmp.path("roc.tsv"));
  CHECK(text.rfind("fpr\ttpr\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == res.roc.size() + 1);
}

TEST_CASE("ground truth scoring plumbs through the label overloads") {
  GroundTruth truth;
  truth.anomalous = {1, 0, 1, 0};
  truth.mechanism = {Mechanism::structural, Mechanism::none, Mechanism::attribute,
                     Mechanism::none};
  const std::vector<double> scores = {0.9, 0.1, 0.8, 0.2};
  CHECK(accuracy_at_k(scores, truth, 2) == 1.0);
  CHECK(auc_roc(scores, truth).auc == 1.0);
  CHECK(truth.anomalous_ids() == std::vector<std::size_t>{0, 2});
}
