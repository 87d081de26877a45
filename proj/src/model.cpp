#include "mvad/model.hpp"

#include <cmath>
#include <cstring>

#include "mvad/errors.hpp"
#include "mvad/kernels.hpp"

namespace mvad {

namespace k = kernels;

std::string to_string(FusionMode m) {
  return m == FusionMode::attention ? "attention" : "average";
}
std::string to_string(EncoderMode m) {
  return m == EncoderMode::simplified ? "simplified" : "multilayer";
}
std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

FusionMode fusion_from_string(const std::string& s) {
  if (s == "attention") return FusionMode::attention;
  if (s == "average") return FusionMode::average;
  throw ValidationError("unknown fusion mode '" + s + "' (attention|average)");
}
EncoderMode encoder_from_string(const std::string& s) {
  if (s == "simplified") return EncoderMode::simplified;
  if (s == "multilayer") return EncoderMode::multilayer;
  throw ValidationError("unknown encoder mode '" + s + "' (simplified|multilayer)");
}
Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + s + "' (relu|identity)");
}

void HyperParams::validate() const {
  if (K < 1) throw ValidationError("hyperparams: K must be >= 1");
  if (L < 1) throw ValidationError("hyperparams: L must be >= 1");
  if (F_L < 1) throw ValidationError("hyperparams: F_L must be >= 1");
  if (F_A < 1) throw ValidationError("hyperparams: F_A must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ValidationError("hyperparams: epsilon must lie strictly in (0,1)");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw ValidationError("hyperparams: learning_rate must be finite and >= 0");
  if (block_rows < 1) throw ValidationError("hyperparams: block_rows must be >= 1");
}

namespace {

DenseMatrix glorot_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : m.data()) v = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

ModelParams ModelParams::glorot(const HyperParams& hp, std::size_t d, Rng& rng) {
  hp.validate();
  ModelParams p;
  p.enc_weights.resize(hp.K);
  for (std::size_t k = 0; k < hp.K; ++k)
    for (std::size_t l = 0; l < hp.enc_layers(); ++l)
      p.enc_weights[k].push_back(
          glorot_matrix(l == 0 ? d : hp.F_L, hp.F_L, rng));
  p.attn_W = glorot_matrix(hp.F_L, hp.F_A, rng);
  p.attn_b = DenseMatrix(1, hp.F_A);  // bias starts at zero
  p.attn_q = glorot_matrix(hp.F_A, 1, rng);
  p.dec_W = glorot_matrix(hp.F_L, d, rng);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& shape) {
  ModelParams p;
  p.enc_weights.resize(shape.enc_weights.size());
  for (std::size_t vk = 0; vk < shape.enc_weights.size(); ++vk)
    for (const DenseMatrix& w : shape.enc_weights[vk])
      p.enc_weights[vk].emplace_back(w.n_rows(), w.n_cols());
  p.attn_W = DenseMatrix(shape.attn_W.n_rows(), shape.attn_W.n_cols());
  p.attn_b = DenseMatrix(shape.attn_b.n_rows(), shape.attn_b.n_cols());
  p.attn_q = DenseMatrix(shape.attn_q.n_rows(), shape.attn_q.n_cols());
  p.dec_W = DenseMatrix(shape.dec_W.n_rows(), shape.dec_W.n_cols());
  return p;
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, DenseMatrix&)>& f) {
  for (std::size_t vk = 0; vk < enc_weights.size(); ++vk)
    for (std::size_t l = 0; l < enc_weights[vk].size(); ++l)
      f("enc_w[" + std::to_string(vk) + "][" + std::to_string(l) + "]", enc_weights[vk][l]);
  f("attn_W", attn_W);
  f("attn_b", attn_b);
  f("attn_q", attn_q);
  f("dec_W", dec_W);
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, const DenseMatrix&)>& f) const {
  const_cast<ModelParams*>(this)->for_each_tensor(
      [&](const std::string& name, DenseMatrix& m) { f(name, m); });
}

std::size_t ModelParams::coordinate_count() const {
  std::size_t total = 0;
  for_each_tensor([&](const std::string&, const DenseMatrix& m) { total += m.size(); });
  return total;
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for_each_tensor([&](const std::string&, const DenseMatrix& m) {
    for (double v : m.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
  });
  return h;
}

void ModelParams::validate_shapes(const HyperParams& hp, std::size_t d) const {
  if (enc_weights.size() != hp.K)
    throw ValidationError("params: encoder weight count differs from K");
  for (std::size_t vk = 0; vk < hp.K; ++vk) {
    if (enc_weights[vk].size() != hp.enc_layers())
      throw ValidationError("params: encoder layer count differs from mode");
    for (std::size_t l = 0; l < enc_weights[vk].size(); ++l) {
      const std::size_t want_rows = l == 0 ? d : hp.F_L;
      if (enc_weights[vk][l].n_rows() != want_rows || enc_weights[vk][l].n_cols() != hp.F_L)
        throw ValidationError("params: encoder weight shape mismatch");
    }
  }
  if (attn_W.n_rows() != hp.F_L || attn_W.n_cols() != hp.F_A)
    throw ValidationError("params: attn_W shape mismatch");
  if (attn_b.n_rows() != 1 || attn_b.n_cols() != hp.F_A)
    throw ValidationError("params: attn_b shape mismatch");
  if (attn_q.n_rows() != hp.F_A || attn_q.n_cols() != 1)
    throw ValidationError("params: attn_q shape mismatch");
  if (dec_W.n_rows() != hp.F_L || dec_W.n_cols() != d)
    throw ValidationError("params: dec_W shape mismatch");
  bool finite = true;
  for_each_tensor([&](const std::string&, const DenseMatrix& m) {
    if (!m.all_finite()) finite = false;
  });
  if (!finite) throw ValidationError("params: non-finite entries");
}

EncoderInputs prepare_inputs(const MultiViewNetwork& network, const HyperParams& hp) {
  hp.validate();
  if (hp.K != network.n_views())
    throw ValidationError("hyperparams: K differs from the network's view count");
  EncoderInputs in;
  if (hp.encoder == EncoderMode::simplified) {
    for (const ViewGraph& v : network.views) {
      DenseMatrix p = network.attributes;
      for (std::size_t l = 0; l < hp.L; ++l) {
        DenseMatrix next;
        k::spmm(v.norm(), p, next);
        p = std::move(next);
      }
      in.propagated.push_back(std::move(p));
    }
  }
  in.union_norm = normalize(union_adjacency(network));
  return in;
}

std::uint64_t fold_mask_hash(std::uint64_t h, const std::vector<unsigned char>& mask) {
  h ^= mask.size();
  h *= 1099511628211ull;
  for (unsigned char b : mask) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

DenseMatrix apply_activation(const DenseMatrix& m, Activation g, const MaskSink* masks) {
  DenseMatrix out;
  if (g == Activation::relu) {
    std::vector<unsigned char> mask;
    k::relu_with_mask(m, out, mask);
    if (masks && *masks) (*masks)(mask);
  } else {
    out = m;
  }
  return out;
}

}  // namespace

DenseMatrix encode_view(const MultiViewNetwork& network, const EncoderInputs& inputs,
                        std::size_t view_index, const ModelParams& params,
                        const HyperParams& hp, const MaskSink* masks) {
  if (view_index >= network.n_views())
    throw ValidationError("encode_view: view index out of range");
  if (hp.encoder == EncoderMode::simplified) {
    if (inputs.propagated.size() != network.n_views())
      throw ValidationError("encode_view: propagated inputs missing");
    DenseMatrix zpre;
    k::matmul(inputs.propagated[view_index], params.enc_weights[view_index][0], zpre);
    return apply_activation(zpre, hp.activation, masks);
  }
  DenseMatrix h = network.attributes;
  for (std::size_t l = 0; l < hp.L; ++l) {
    DenseMatrix t, u;
    k::spmm(network.views[view_index].norm(), h, t);
    k::matmul(t, params.enc_weights[view_index][l], u);
    h = apply_activation(u, hp.activation, masks);
  }
  return h;
}

std::pair<DenseMatrix, std::vector<double>> fuse(const std::vector<DenseMatrix>& per_view_Z,
                                                 const ModelParams& params,
                                                 const HyperParams& hp) {
  if (per_view_Z.empty()) throw ValidationError("fuse: no views");
  for (const DenseMatrix& z : per_view_Z)
    if (!z.same_shape(per_view_Z[0])) throw ValidationError("fuse: view shapes differ");

  const std::size_t K = per_view_Z.size();
  std::vector<double> alpha;
  if (hp.fusion == FusionMode::attention) {
    std::vector<double> scores(K);
    for (std::size_t vk = 0; vk < K; ++vk) {
      DenseMatrix proj, shifted, hidden, s;
      k::matmul(per_view_Z[vk], params.attn_W, proj);
      k::add_row_bias(proj, params.attn_b, shifted);
      k::tanh_mat(shifted, hidden);
      k::matmul(hidden, params.attn_q, s);
      scores[vk] = k::sum_ordered(s.data()) / static_cast<double>(s.size());
    }
    alpha = k::softmax(scores);
  } else {
    alpha.assign(K, 1.0 / static_cast<double>(K));
  }
  std::vector<const DenseMatrix*> zs;
  for (const DenseMatrix& z : per_view_Z) zs.push_back(&z);
  DenseMatrix fused;
  k::weighted_sum(zs, alpha, fused);
  return {std::move(fused), std::move(alpha)};
}

double decode_structure(const DenseMatrix& z_view, const SparseMatrix& target,
                        std::size_t block_rows, std::vector<double>* row_errors) {
  std::vector<double> local;
  std::vector<double>& re = row_errors ? *row_errors : local;
  k::sigmoid_gram_row_errors(z_view, target, block_rows, re);
  return k::sum_ordered(re);
}

DenseMatrix decode_attributes(const DenseMatrix& fused_Z, const SparseMatrix& union_norm,
                              const ModelParams& params, Activation g, const MaskSink* masks) {
  DenseMatrix propagated, pre;
  k::spmm(union_norm, fused_Z, propagated);
  k::matmul(propagated, params.dec_W, pre);
  return apply_activation(pre, g, masks);
}

ForwardOutputs forward(const MultiViewNetwork& network, const EncoderInputs& inputs,
                       const ModelParams& params, const HyperParams& hp) {
  hp.validate();
  if (hp.K != network.n_views())
    throw ValidationError("forward: K differs from the network's view count");
  params.validate_shapes(hp, network.d);

  ForwardOutputs fo;
  std::uint64_t hash = 1469598103934665603ull;
  MaskSink sink = [&hash](const std::vector<unsigned char>& mask) {
    hash = fold_mask_hash(hash, mask);
  };

  for (std::size_t vk = 0; vk < hp.K; ++vk)
    fo.per_view_Z.push_back(encode_view(network, inputs, vk, params, hp, &sink));

  auto [fused, alpha] = fuse(fo.per_view_Z, params, hp);
  fo.fused_Z = std::move(fused);
  fo.attn_weights = std::move(alpha);

  fo.structure_row_errors.resize(hp.K);
  fo.loss_structure.resize(hp.K);
  for (std::size_t vk = 0; vk < hp.K; ++vk)
    fo.loss_structure[vk] = decode_structure(fo.per_view_Z[vk], network.views[vk].adjacency,
                                             hp.block_rows, &fo.structure_row_errors[vk]);

  fo.recon_X = decode_attributes(fo.fused_Z, inputs.union_norm, params, hp.activation, &sink);
  k::frobenius_row_errors(fo.recon_X, network.attributes, fo.attr_row_errors);
  fo.loss_attribute = k::sum_ordered(fo.attr_row_errors);

  fo.loss_structure_mean =
      k::sum_ordered(fo.loss_structure) / static_cast<double>(hp.K);
  fo.loss_total = hp.epsilon * fo.loss_structure_mean + (1.0 - hp.epsilon) * fo.loss_attribute;
  fo.relu_pattern_hash = hash;

  if (!std::isfinite(fo.loss_total))
    throw NumericError("forward: loss is not finite");
  return fo;
}

std::vector<double> assemble_scores(const std::vector<std::vector<double>>& structure_row_errors,
                                    const std::vector<double>& attr_row_errors, double epsilon) {
  if (structure_row_errors.empty())
    throw ValidationError("assemble_scores: no structure errors");
  const std::size_t n = attr_row_errors.size();
  const std::size_t K = structure_row_errors.size();
  for (const std::vector<double>& re : structure_row_errors)
    if (re.size() != n) throw ValidationError("assemble_scores: length mismatch");
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t vk = 0; vk < K; ++vk) acc += structure_row_errors[vk][i];
    scores[i] = epsilon * (acc / static_cast<double>(K)) + (1.0 - epsilon) * attr_row_errors[i];
  }
  return scores;
}

std::vector<double> anomaly_scores(const MultiViewNetwork& network, const EncoderInputs& inputs,
                                   const ModelParams& params, const HyperParams& hp) {
  const ForwardOutputs fo = forward(network, inputs, params, hp);
  return assemble_scores(fo.structure_row_errors, fo.attr_row_errors, hp.epsilon);
}

}  // namespace mvad
