#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "mvad/errors.hpp"
#include "mvad/graph.hpp"
#include "mvad/kernels.hpp"
#include "mvad/model.hpp"
#include "mvad/rng.hpp"
#include "support/reference_model.hpp"
#include "support/synthetic.hpp"

using namespace mvad;

namespace {

MultiViewNetwork make_net(std::size_t n, std::size_t d,
                          const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>&
                              view_edges,
                          const DenseMatrix& attrs) {
  MultiViewNetwork net;
  net.n = n;
  net.d = d;
  net.attributes = attrs;
  for (std::size_t k = 0; k < view_edges.size(); ++k) {
    EdgeSetBuilder builder(n);
    for (auto [i, j] : view_edges[k]) builder.add_edge(i, j);
    ViewGraph v;
    v.view_name = "v" + std::to_string(k);
    v.adjacency = builder.build();
    v.ensure_normalized();
    net.views.push_back(std::move(v));
  }
  net.validate();
  return net;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool bitwise_equal(const DenseMatrix& a, const DenseMatrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("an isolated node passes its attribute straight through the encoder") {
  MultiViewNetwork net = make_net(1, 1, {{}}, DenseMatrix::from_rows({{2.0}}));
  HyperParams hp;
  hp.K = 1;
  hp.L = 3;
  hp.F_L = 1;
  hp.F_A = 1;
  ModelParams params;
  params.enc_weights = {{DenseMatrix::from_rows({{1.0}})}};
  params.attn_W = DenseMatrix::from_rows({{1.0}});
  params.attn_b = DenseMatrix(1, 1);
  params.attn_q = DenseMatrix::from_rows({{1.0}});
  params.dec_W = DenseMatrix::from_rows({{1.0}});

  EncoderInputs inputs = prepare_inputs(net, hp);
  DenseMatrix z = encode_view(net, inputs, 0, params, hp);
  CHECK(z(0, 0) == 2.0);
}

TEST_CASE("one propagation over a single edge averages the two attributes") {
  // A~ for a single edge is the all-half matrix, so [4, 0] becomes [2, 2]
  // after one hop and stays there: the smoothing fixed point.
  MultiViewNetwork net = make_net(2, 1, {{{0, 1}}}, DenseMatrix::from_rows({{4.0}, {0.0}}));
  for (std::size_t L : {1, 2, 5}) {
    HyperParams hp;
    hp.K = 1;
    hp.L = L;
    hp.F_L = 1;
    hp.F_A = 1;
    ModelParams params;
    params.enc_weights = {{DenseMatrix::from_rows({{1.0}})}};
    params.attn_W = DenseMatrix::from_rows({{1.0}});
    params.attn_b = DenseMatrix(1, 1);
    params.attn_q = DenseMatrix::from_rows({{1.0}});
    params.dec_W = DenseMatrix::from_rows({{1.0}});
    EncoderInputs inputs = prepare_inputs(net, hp);
    DenseMatrix z = encode_view(net, inputs, 0, params, hp);
    CHECK(z(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(z(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("simplified and multilayer encoders coincide for L=1 and shared weights") {
  Rng rng(5);
  MultiViewNetwork net = support::random_tiny_network(rng, 7, 2, 4);
  HyperParams simple;
  simple.K = 2;
  simple.L = 1;
  simple.F_L = 3;
  simple.F_A = 3;
  simple.encoder = EncoderMode::simplified;
  HyperParams multi = simple;
  multi.encoder = EncoderMode::multilayer;

  Rng init(11);
  ModelParams params = ModelParams::glorot(simple, net.d, init);

  EncoderInputs in_simple = prepare_inputs(net, simple);
  EncoderInputs in_multi = prepare_inputs(net, multi);
  for (std::size_t k = 0; k < 2; ++k) {
    DenseMatrix zs = encode_view(net, in_simple, k, params, simple);
    DenseMatrix zm = encode_view(net, in_multi, k, params, multi);
    REQUIRE(zs.same_shape(zm));
    for (std::size_t i = 0; i < zs.n_rows(); ++i)
      for (std::size_t j = 0; j < zs.n_cols(); ++j)
        CHECK(zs(i, j) == doctest::Approx(zm(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("multilayer parameters carry L weight matrices per view") {
  HyperParams hp;
  hp.K = 2;
  hp.L = 3;
  hp.F_L = 4;
  hp.F_A = 4;
  hp.encoder = EncoderMode::multilayer;
  Rng rng(1);
  ModelParams params = ModelParams::glorot(hp, 6, rng);
  REQUIRE(params.enc_weights.size() == 2);
  for (const auto& layers : params.enc_weights) {
    REQUIRE(layers.size() == 3);
    CHECK(layers[0].n_rows() == 6);
    CHECK(layers[0].n_cols() == 4);
    CHECK(layers[1].n_rows() == 4);
    CHECK(layers[2].n_cols() == 4);
  }
}

TEST_CASE("identical views fuse with uniform attention") {
  Rng rng(7);
  DenseMatrix z(5, 3);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) z(i, j) = rng.normal();

  HyperParams hp;
  hp.K = 3;
  hp.F_L = 3;
  hp.F_A = 2;
  Rng init(3);
  ModelParams params = ModelParams::glorot(hp, 4, init);

  auto [fused, alpha] = fuse({z, z, z}, params, hp);
  for (double a : alpha) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(fused(i, j) == doctest::Approx(z(i, j)).epsilon(1e-14));
}

TEST_CASE("a single view fuses to itself with weight one") {
  DenseMatrix z = DenseMatrix::from_rows({{1.5, -2.0}});
  HyperParams hp;
  hp.K = 1;
  hp.F_L = 2;
  hp.F_A = 2;
  Rng init(9);
  ModelParams params = ModelParams::glorot(hp, 3, init);
  auto [fused, alpha] = fuse({z}, params, hp);
  REQUIRE(alpha.size() == 1);
  CHECK(alpha[0] == 1.0);
  CHECK(bitwise_equal(fused, z));
}

TEST_CASE("scalar attention matches the closed form") {
  DenseMatrix z1 = DenseMatrix::from_rows({{1.0}});
  DenseMatrix z2 = DenseMatrix::from_rows({{2.0}});
  HyperParams hp;
  hp.K = 2;
  hp.F_L = 1;
  hp.F_A = 1;
  ModelParams params;
  params.enc_weights = {{DenseMatrix::from_rows({{1.0}})}, {DenseMatrix::from_rows({{1.0}})}};
  params.attn_W = DenseMatrix::from_rows({{1.0}});
  params.attn_b = DenseMatrix(1, 1);
  params.attn_q = DenseMatrix::from_rows({{1.0}});
  params.dec_W = DenseMatrix::from_rows({{1.0}});

  auto [fused, alpha] = fuse({z1, z2}, params, hp);
  double e1 = std::tanh(1.0), e2 = std::tanh(2.0);
  double a1 = std::exp(e1) / (std::exp(e1) + std::exp(e2));
  CHECK(alpha[0] == doctest::Approx(a1).epsilon(1e-14));
  CHECK(alpha[1] == doctest::Approx(1.0 - a1).epsilon(1e-14));
  CHECK(fused(0, 0) == doctest::Approx(a1 * 1.0 + (1.0 - a1) * 2.0).epsilon(1e-14));
}

TEST_CASE("average fusion ignores the attention parameters") {
  Rng rng(13);
  DenseMatrix z1(4, 2), z2(4, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      z1(i, j) = rng.normal();
      z2(i, j) = rng.normal();
    }
  HyperParams hp;
  hp.K = 2;
  hp.F_L = 2;
  hp.F_A = 2;
  hp.fusion = FusionMode::average;
  Rng init(1);
  ModelParams params = ModelParams::glorot(hp, 3, init);
  auto [fused, alpha] = fuse({z1, z2}, params, hp);
  CHECK(alpha == std::vector<double>{0.5, 0.5});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(fused(i, j) == doctest::Approx(0.5 * z1(i, j) + 0.5 * z2(i, j)).epsilon(1e-15));
}

TEST_CASE("permuting the views permutes attention weights and keeps the fusion") {
  Rng rng(17);
  std::vector<DenseMatrix> zs;
  for (int k = 0; k < 3; ++k) {
    DenseMatrix z(6, 3);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 3; ++j) z(i, j) = rng.normal();
    zs.push_back(z);
  }
  HyperParams hp;
  hp.K = 3;
  hp.F_L = 3;
  hp.F_A = 4;
  Rng init(23);
  ModelParams params = ModelParams::glorot(hp, 5, init);

  auto [fused, alpha] = fuse(zs, params, hp);
  auto [fused_p, alpha_p] = fuse({zs[2], zs[0], zs[1]}, params, hp);
  CHECK(alpha_p[0] == doctest::Approx(alpha[2]).epsilon(1e-14));
  CHECK(alpha_p[1] == doctest::Approx(alpha[0]).epsilon(1e-14));
  CHECK(alpha_p[2] == doctest::Approx(alpha[1]).epsilon(1e-14));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(fused_p(i, j) == doctest::Approx(fused(i, j)).epsilon(1e-12));
}

TEST_CASE("a zero embedding prices every pair at one half") {
  // sigmoid(0) = 0.5 against binary targets gives |a - 0.5| = 0.5 for all
  // n^2 entries, edges or not.
  for (auto edges : std::vector<std::vector<std::pair<std::size_t, std::size_t>>>{
           {}, {{0, 1}, {1, 2}}}) {
    MultiViewNetwork net = make_net(4, 1, {edges}, DenseMatrix(4, 1));
    DenseMatrix z(4, 3);
    double loss = decode_structure(z, net.views[0].adjacency, 256);
    CHECK(loss == 0.5 * 16.0);
  }
}

TEST_CASE("structure loss on two nodes matches the hand expansion") {
  MultiViewNetwork net = make_net(2, 1, {{{0, 1}}}, DenseMatrix(2, 1));
  DenseMatrix z = DenseMatrix::from_rows({{3.0}, {1.0}});
  // Gram entries: 9, 3, 3, 1 against targets 0, 1, 1, 0.
  double expected = sigmoid(9.0) + 2.0 * (1.0 - sigmoid(3.0)) + sigmoid(1.0);
  std::vector<double> rows;
  double loss = decode_structure(z, net.views[0].adjacency, 256, &rows);
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rows[0] == doctest::Approx(sigmoid(9.0) + 1.0 - sigmoid(3.0)).epsilon(1e-12));
  CHECK(rows[1] == doctest::Approx(sigmoid(1.0) + 1.0 - sigmoid(3.0)).epsilon(1e-12));
}

TEST_CASE("blockwise structure loss equals the single-block evaluation bitwise") {
  Rng rng(29);
  MultiViewNetwork net = support::random_tiny_network(rng, 50, 1, 3);
  DenseMatrix z(50, 4);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 4; ++j) z(i, j) = rng.normal();
  double whole = decode_structure(z, net.views[0].adjacency, 50);
  for (std::size_t block : {1, 7, 17, 49, 256}) {
    CHECK(decode_structure(z, net.views[0].adjacency, block) == whole);
  }
}

TEST_CASE("attribute decoder clips negatives through relu") {
  SparseMatrix self_only = normalize(EdgeSetBuilder(1).build());
  ModelParams params;
  params.enc_weights = {{DenseMatrix::from_rows({{1.0}})}};
  params.attn_W = DenseMatrix::from_rows({{1.0}});
  params.attn_b = DenseMatrix(1, 1);
  params.attn_q = DenseMatrix::from_rows({{1.0}});
  params.dec_W = DenseMatrix::from_rows({{-2.0}});
  DenseMatrix fused = DenseMatrix::from_rows({{1.0}});
  DenseMatrix xhat = decode_attributes(fused, self_only, params, Activation::relu);
  CHECK(xhat(0, 0) == 0.0);
}

TEST_CASE("attribute decoder over an edgeless graph reduces to relu of the product") {
  // normalize of the empty adjacency is the identity, so X^ = relu(Z W).
  SparseMatrix identity_norm = normalize(EdgeSetBuilder(2).build());
  ModelParams params;
  params.enc_weights = {{DenseMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}})}};
  params.attn_W = DenseMatrix::from_rows({{1.0}, {1.0}});
  params.attn_b = DenseMatrix(1, 1);
  params.attn_q = DenseMatrix::from_rows({{1.0}});
  params.dec_W = DenseMatrix::from_rows({{2.0, -1.0}, {0.5, 3.0}});
  DenseMatrix fused = DenseMatrix::from_rows({{1.0, 2.0}, {-1.0, 0.5}});
  DenseMatrix xhat = decode_attributes(fused, identity_norm, params, Activation::relu);
  CHECK(xhat(0, 0) == 3.0);    // 1*2 + 2*0.5
  CHECK(xhat(0, 1) == 5.0);    // 1*(-1) + 2*3
  CHECK(xhat(1, 0) == 0.0);    // -2 + 0.25 clipped
  CHECK(xhat(1, 1) == 2.5);    // 1 + 1.5
}

TEST_CASE("forward losses decompose and scores sum to the total") {
  Rng rng(31);
  for (auto fusion : {FusionMode::attention, FusionMode::average}) {
    for (auto encoder : {EncoderMode::simplified, EncoderMode::multilayer}) {
      MultiViewNetwork net = support::random_tiny_network(rng, 9, 3, 5);
      HyperParams hp;
      hp.K = 3;
      hp.L = 2;
      hp.F_L = 4;
      hp.F_A = 3;
      hp.epsilon = 0.35;
      hp.fusion = fusion;
      hp.encoder = encoder;
      Rng init(41);
      ModelParams params = ModelParams::glorot(hp, net.d, init);
      EncoderInputs inputs = prepare_inputs(net, hp);
      ForwardOutputs fo = forward(net, inputs, params, hp);

      double mean = 0.0;
      for (double v : fo.loss_structure) mean += v;
      mean /= 3.0;
      CHECK(fo.loss_structure_mean == doctest::Approx(mean).epsilon(1e-12));
      CHECK(fo.loss_total ==
            doctest::Approx(0.35 * mean + 0.65 * fo.loss_attribute).epsilon(1e-12));

      std::vector<double> scores =
          assemble_scores(fo.structure_row_errors, fo.attr_row_errors, hp.epsilon);
      double total = 0.0;
      for (double s : scores) total += s;
      CHECK(total == doctest::Approx(fo.loss_total).epsilon(1e-9));

      std::vector<double> direct = anomaly_scores(net, inputs, params, hp);
      CHECK(direct == scores);
    }
  }
}

TEST_CASE("forward agrees with the straight-line dense reimplementation") {
  Rng rng(37);
  for (auto fusion : {FusionMode::attention, FusionMode::average}) {
    for (auto encoder : {EncoderMode::simplified, EncoderMode::multilayer}) {
      MultiViewNetwork net = support::random_tiny_network(rng, 6, 2, 4);
      HyperParams hp;
      hp.K = 2;
      hp.L = 3;
      hp.F_L = 3;
      hp.F_A = 2;
      hp.epsilon = 0.6;
      hp.fusion = fusion;
      hp.encoder = encoder;
      Rng init(43);
      ModelParams params = ModelParams::glorot(hp, net.d, init);

      EncoderInputs inputs = prepare_inputs(net, hp);
      ForwardOutputs fo = forward(net, inputs, params, hp);
      support::reference::Result ref = support::reference::evaluate(net, params, hp);

      CHECK(fo.loss_total == doctest::Approx(ref.loss_total).epsilon(1e-9));
      CHECK(fo.loss_attribute == doctest::Approx(ref.loss_attribute).epsilon(1e-9));
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(fo.loss_structure[k] == doctest::Approx(ref.loss_structure[k]).epsilon(1e-9));
        CHECK(fo.attn_weights[k] == doctest::Approx(ref.alpha[k]).epsilon(1e-9));
      }
      std::vector<double> scores =
          assemble_scores(fo.structure_row_errors, fo.attr_row_errors, hp.epsilon);
      for (std::size_t i = 0; i < net.n; ++i)
        CHECK(scores[i] == doctest::Approx(ref.scores[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("constant attribute columns stay constant on a regular graph") {
  // Every node of a cycle has the same self-looped degree, so the normalized
  // propagation has row sums exactly one and preserves constant signals: the
  // zero-frequency component passes the low-pass filter with unit gain.
  std::vector<std::pair<std::size_t, std::size_t>> ring;
  for (std::size_t i = 0; i < 8; ++i) ring.emplace_back(i, (i + 1) % 8);
  DenseMatrix attrs(8, 2);
  for (std::size_t i = 0; i < 8; ++i) {
    attrs(i, 0) = 2.5;
    attrs(i, 1) = -1.25;
  }
  MultiViewNetwork net = make_net(8, 2, {ring}, attrs);
  HyperParams hp;
  hp.K = 1;
  hp.L = 4;
  hp.F_L = 2;
  hp.F_A = 2;
  EncoderInputs inputs = prepare_inputs(net, hp);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(inputs.propagated[0](i, 0) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(inputs.propagated[0](i, 1) == doctest::Approx(-1.25).epsilon(1e-12));
  }
}

TEST_CASE("relu pattern hash is reproducible and sensitive to flipped units") {
  Rng rng(47);
  MultiViewNetwork net = support::random_tiny_network(rng, 8, 2, 4);
  HyperParams hp;
  hp.K = 2;
  hp.L = 2;
  hp.F_L = 3;
  hp.F_A = 3;
  Rng init(53);
  ModelParams params = ModelParams::glorot(hp, net.d, init);
  EncoderInputs inputs = prepare_inputs(net, hp);

  ForwardOutputs a = forward(net, inputs, params, hp);
  ForwardOutputs b = forward(net, inputs, params, hp);
  CHECK(a.relu_pattern_hash == b.relu_pattern_hash);
  CHECK(a.loss_total == b.loss_total);

  ModelParams flipped = params;
  for (auto& layers : flipped.enc_weights)
    for (auto& w : layers)
      for (double& v : w.data()) v = -1000.0 * std::fabs(v);
  ForwardOutputs c = forward(net, inputs, flipped, hp);
  CHECK(c.relu_pattern_hash != a.relu_pattern_hash);
}

TEST_CASE("glorot init is seed-deterministic") {
  HyperParams hp;
  hp.K = 2;
  hp.L = 2;
  hp.F_L = 3;
  hp.F_A = 3;
  Rng r1(7), r2(7), r3(8);
  ModelParams a = ModelParams::glorot(hp, 5, r1);
  ModelParams b = ModelParams::glorot(hp, 5, r2);
  ModelParams c = ModelParams::glorot(hp, 5, r3);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());

  // biases start at zero, weights inside the glorot bound
  for (std::size_t j = 0; j < a.attn_b.n_cols(); ++j) CHECK(a.attn_b(0, j) == 0.0);
  double limit = std::sqrt(6.0 / (5 + 3));
  for (double v : a.enc_weights[0][0].data()) CHECK(std::fabs(v) <= limit);
}

TEST_CASE("hyperparameter validation rejects out-of-range settings") {
  HyperParams hp;
  hp.K = 1;
  CHECK_NOTHROW(hp.validate());
  HyperParams bad = hp;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = hp;
  bad.epsilon = 1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = hp;
  bad.F_L = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = hp;
  bad.L = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = hp;
  bad.learning_rate = -0.001;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = hp;
  bad.block_rows = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("perfect reconstruction scores zero") {
  std::vector<std::vector<double>> structure = {{0.0, 0.0}, {0.0, 0.0}};
  std::vector<double> attr = {0.0, 0.0};
  std::vector<double> scores = assemble_scores(structure, attr, 0.5);
  CHECK(scores == std::vector<double>{0.0, 0.0});
}

TEST_CASE("the forward pass rejects mismatched parameter shapes") {
  Rng rng(59);
  MultiViewNetwork net = support::random_tiny_network(rng, 5, 2, 3);
  HyperParams hp;
  hp.K = 2;
  hp.F_L = 3;
  hp.F_A = 3;
  Rng init(61);
  ModelParams params = ModelParams::glorot(hp, net.d, init);
  params.dec_W = DenseMatrix(2, 2);
  EncoderInputs inputs = prepare_inputs(net, hp);
  CHECK_THROWS_AS(forward(net, inputs, params, hp), ValidationError);
}
