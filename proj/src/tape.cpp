#include "mvad/tape.hpp"

#include <cmath>
#include <string>

#include "mvad/errors.hpp"
#include "mvad/kernels.hpp"

namespace mvad {

namespace k = kernels;

namespace {

enum class Op {
  input,
  param,
  matmul,
  spmm_sym,
  add_row_bias,
  relu,
  tanh_op,
  mean_all,
  sigmoid_gram_l1,
  frobenius_loss,
  softmax_weighted_sum,
  average_stack,
  joint_loss,
};

const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::param: return "param";
    case Op::matmul: return "matmul";
    case Op::spmm_sym: return "spmm-const";
    case Op::add_row_bias: return "add-bias";
    case Op::relu: return "relu";
    case Op::tanh_op: return "tanh";
    case Op::mean_all: return "mean-all";
    case Op::sigmoid_gram_l1: return "sigmoid-gram-l1";
    case Op::frobenius_loss: return "frobenius-loss";
    case Op::softmax_weighted_sum: return "softmax-weighted-sum";
    case Op::average_stack: return "average-stack";
    case Op::joint_loss: return "joint-loss";
  }
  return "?";
}

DenseMatrix scalar(double v) {
  DenseMatrix m(1, 1);
  m(0, 0) = v;
  return m;
}

void add_into(DenseMatrix& dst, const DenseMatrix& src) {
  for (std::size_t p = 0; p < dst.size(); ++p) dst.data()[p] += src.data()[p];
}

}  // namespace

// leaf is set for input/param nodes; computed nodes own their value in
// storage. Values are always reached through val_of so that growing the node
// vector never leaves a stale pointer behind.
struct GradientTape::Node {
  Op op;
  std::vector<ValueId> inputs;
  const DenseMatrix* leaf = nullptr;
  DenseMatrix storage;
  DenseMatrix gradient;
  bool needs_grad = false;
  bool grad_set = false;

  std::vector<unsigned char> mask;           // relu
  std::vector<double> errs;                  // gram / frobenius row errors
  std::vector<double> weights;               // fusion weights
  const SparseMatrix* sparse = nullptr;      // spmm_sym / gram target
  const DenseMatrix* dense_const = nullptr;  // frobenius target
  std::size_t block_rows = 0;
  double epsilon = 0.0;

  const DenseMatrix& val_of() const { return leaf ? *leaf : storage; }
};

GradientTape::GradientTape() = default;
GradientTape::~GradientTape() = default;
std::size_t GradientTape::size() const { return nodes_.size(); }

GradientTape::ValueId GradientTape::push(Node&& node) {
  if (!node.val_of().all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op_name(node.op));
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

GradientTape::ValueId GradientTape::input(const DenseMatrix* value) {
  Node n;
  n.op = Op::input;
  n.leaf = value;
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::param(const DenseMatrix* value) {
  Node n;
  n.op = Op::param;
  n.leaf = value;
  n.needs_grad = true;
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::matmul(ValueId a, ValueId b) {
  Node n;
  n.op = Op::matmul;
  n.inputs = {a, b};
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  k::matmul(nodes_[a].val_of(), nodes_[b].val_of(), n.storage);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::spmm_sym(const SparseMatrix* s, ValueId b) {
  Node n;
  n.op = Op::spmm_sym;
  n.inputs = {b};
  n.sparse = s;
  n.needs_grad = nodes_[b].needs_grad;
  k::spmm(*s, nodes_[b].val_of(), n.storage);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::add_row_bias(ValueId a, ValueId bias) {
  Node n;
  n.op = Op::add_row_bias;
  n.inputs = {a, bias};
  n.needs_grad = nodes_[a].needs_grad || nodes_[bias].needs_grad;
  k::add_row_bias(nodes_[a].val_of(), nodes_[bias].val_of(), n.storage);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::relu(ValueId a) {
  Node n;
  n.op = Op::relu;
  n.inputs = {a};
  n.needs_grad = nodes_[a].needs_grad;
  k::relu_with_mask(nodes_[a].val_of(), n.storage, n.mask);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::tanh_op(ValueId a) {
  Node n;
  n.op = Op::tanh_op;
  n.inputs = {a};
  n.needs_grad = nodes_[a].needs_grad;
  k::tanh_mat(nodes_[a].val_of(), n.storage);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::mean_all(ValueId a) {
  Node n;
  n.op = Op::mean_all;
  n.inputs = {a};
  n.needs_grad = nodes_[a].needs_grad;
  const DenseMatrix& v = nodes_[a].val_of();
  if (v.size() == 0) throw ValidationError("mean-all: empty matrix");
  n.storage = scalar(k::sum_ordered(v.data()) / static_cast<double>(v.size()));
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::sigmoid_gram_l1(ValueId z, const SparseMatrix* target,
                                                    std::size_t block_rows) {
  Node n;
  n.op = Op::sigmoid_gram_l1;
  n.inputs = {z};
  n.sparse = target;
  n.block_rows = block_rows;
  n.needs_grad = nodes_[z].needs_grad;
  k::sigmoid_gram_row_errors(nodes_[z].val_of(), *target, block_rows, n.errs);
  n.storage = scalar(k::sum_ordered(n.errs));
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::frobenius_loss(ValueId xhat, const DenseMatrix* x) {
  Node n;
  n.op = Op::frobenius_loss;
  n.inputs = {xhat};
  n.dense_const = x;
  n.needs_grad = nodes_[xhat].needs_grad;
  k::frobenius_row_errors(nodes_[xhat].val_of(), *x, n.errs);
  n.storage = scalar(k::sum_ordered(n.errs));
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::softmax_weighted_sum(const std::vector<ValueId>& scores,
                                                         const std::vector<ValueId>& zs) {
  if (scores.size() != zs.size() || scores.empty())
    throw ValidationError("softmax-weighted-sum: need one score per view");
  Node n;
  n.op = Op::softmax_weighted_sum;
  n.inputs = scores;
  n.inputs.insert(n.inputs.end(), zs.begin(), zs.end());
  std::vector<double> e(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    e[i] = nodes_[scores[i]].val_of()(0, 0);
    if (nodes_[scores[i]].needs_grad) n.needs_grad = true;
  }
  n.weights = k::softmax(e);
  std::vector<const DenseMatrix*> zptr;
  for (ValueId z : zs) {
    zptr.push_back(&nodes_[z].val_of());
    if (nodes_[z].needs_grad) n.needs_grad = true;
  }
  k::weighted_sum(zptr, n.weights, n.storage);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::average_stack(const std::vector<ValueId>& zs) {
  if (zs.empty()) throw ValidationError("average-stack: no inputs");
  Node n;
  n.op = Op::average_stack;
  n.inputs = zs;
  n.weights.assign(zs.size(), 1.0 / static_cast<double>(zs.size()));
  std::vector<const DenseMatrix*> zptr;
  for (ValueId z : zs) {
    zptr.push_back(&nodes_[z].val_of());
    if (nodes_[z].needs_grad) n.needs_grad = true;
  }
  k::weighted_sum(zptr, n.weights, n.storage);
  return push(std::move(n));
}

GradientTape::ValueId GradientTape::joint_loss(const std::vector<ValueId>& structure,
                                               ValueId attribute, double epsilon) {
  if (structure.empty()) throw ValidationError("joint-loss: no structure terms");
  Node n;
  n.op = Op::joint_loss;
  n.inputs = structure;
  n.inputs.push_back(attribute);
  n.epsilon = epsilon;
  n.needs_grad = nodes_[attribute].needs_grad;
  std::vector<double> ls(structure.size());
  for (std::size_t i = 0; i < structure.size(); ++i) {
    ls[i] = nodes_[structure[i]].val_of()(0, 0);
    if (nodes_[structure[i]].needs_grad) n.needs_grad = true;
  }
  const double mean = k::sum_ordered(ls) / static_cast<double>(ls.size());
  n.storage = scalar(epsilon * mean + (1.0 - epsilon) * nodes_[attribute].val_of()(0, 0));
  return push(std::move(n));
}

const DenseMatrix& GradientTape::value(ValueId v) const { return nodes_[v].val_of(); }
const std::vector<double>& GradientTape::row_errors(ValueId v) const { return nodes_[v].errs; }
const std::vector<double>& GradientTape::alpha(ValueId v) const { return nodes_[v].weights; }
const std::vector<unsigned char>& GradientTape::relu_mask(ValueId v) const {
  return nodes_[v].mask;
}

bool GradientTape::has_grad(ValueId v) const { return nodes_[v].grad_set; }

const DenseMatrix& GradientTape::grad(ValueId v) const {
  if (!nodes_[v].grad_set)
    throw ValidationError("tape: gradient was never accumulated for this value");
  return nodes_[v].gradient;
}

DenseMatrix& GradientTape::ensure_grad(ValueId v) {
  Node& n = nodes_[v];
  if (!n.grad_set) {
    n.gradient = DenseMatrix(n.val_of().n_rows(), n.val_of().n_cols());
    n.grad_set = true;
  }
  return n.gradient;
}

void GradientTape::backward(ValueId root) {
  Node& rn = nodes_[root];
  if (rn.val_of().n_rows() != 1 || rn.val_of().n_cols() != 1)
    throw ValidationError("tape: backward root must be a scalar");
  ensure_grad(root)(0, 0) = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    Node& n = nodes_[idx];
    if (!n.grad_set || !n.needs_grad) continue;
    const DenseMatrix& g = n.gradient;
    switch (n.op) {
      case Op::input:
      case Op::param:
        break;
      case Op::matmul: {
        const Node& a = nodes_[n.inputs[0]];
        const Node& b = nodes_[n.inputs[1]];
        if (a.needs_grad) {
          DenseMatrix da;
          k::matmul_abt(g, b.val_of(), da);
          add_into(ensure_grad(n.inputs[0]), da);
        }
        if (b.needs_grad) {
          DenseMatrix db;
          k::matmul_atb(a.val_of(), g, db);
          add_into(ensure_grad(n.inputs[1]), db);
        }
        break;
      }
      case Op::spmm_sym: {
        if (nodes_[n.inputs[0]].needs_grad) {
          DenseMatrix db;
          k::spmm(*n.sparse, g, db);
          add_into(ensure_grad(n.inputs[0]), db);
        }
        break;
      }
      case Op::add_row_bias: {
        if (nodes_[n.inputs[0]].needs_grad) add_into(ensure_grad(n.inputs[0]), g);
        if (nodes_[n.inputs[1]].needs_grad) {
          DenseMatrix db;
          k::col_sums(g, db);
          add_into(ensure_grad(n.inputs[1]), db);
        }
        break;
      }
      case Op::relu: {
        if (nodes_[n.inputs[0]].needs_grad) {
          DenseMatrix& da = ensure_grad(n.inputs[0]);
          for (std::size_t p = 0; p < g.size(); ++p)
            if (n.mask[p]) da.data()[p] += g.data()[p];
        }
        break;
      }
      case Op::tanh_op: {
        if (nodes_[n.inputs[0]].needs_grad) {
          DenseMatrix& da = ensure_grad(n.inputs[0]);
          const DenseMatrix& y = n.val_of();
          for (std::size_t p = 0; p < g.size(); ++p)
            da.data()[p] += g.data()[p] * (1.0 - y.data()[p] * y.data()[p]);
        }
        break;
      }
      case Op::mean_all: {
        if (nodes_[n.inputs[0]].needs_grad) {
          DenseMatrix& da = ensure_grad(n.inputs[0]);
          const double w = g(0, 0) / static_cast<double>(da.size());
          for (std::size_t p = 0; p < da.size(); ++p) da.data()[p] += w;
        }
        break;
      }
      case Op::sigmoid_gram_l1: {
        if (nodes_[n.inputs[0]].needs_grad)
          k::sigmoid_gram_l1_grad(nodes_[n.inputs[0]].val_of(), *n.sparse, g(0, 0),
                                  n.block_rows, ensure_grad(n.inputs[0]));
        break;
      }
      case Op::frobenius_loss: {
        if (nodes_[n.inputs[0]].needs_grad) {
          DenseMatrix& da = ensure_grad(n.inputs[0]);
          const DenseMatrix& xhat = nodes_[n.inputs[0]].val_of();
          const double w = 2.0 * g(0, 0);
          for (std::size_t p = 0; p < da.size(); ++p)
            da.data()[p] += w * (xhat.data()[p] - n.dense_const->data()[p]);
        }
        break;
      }
      case Op::softmax_weighted_sum: {
        const std::size_t kk = n.weights.size();
        // dZ_j = alpha_j * g; de_j = alpha_j * (dot_j - sum_i alpha_i dot_i)
        std::vector<double> dots(kk);
        for (std::size_t j = 0; j < kk; ++j) {
          const DenseMatrix& zj = nodes_[n.inputs[kk + j]].val_of();
          double acc = 0.0;
          for (std::size_t p = 0; p < g.size(); ++p) acc += g.data()[p] * zj.data()[p];
          dots[j] = acc;
        }
        double mix = 0.0;
        for (std::size_t j = 0; j < kk; ++j) mix += n.weights[j] * dots[j];
        for (std::size_t j = 0; j < kk; ++j) {
          if (nodes_[n.inputs[kk + j]].needs_grad) {
            DenseMatrix& dz = ensure_grad(n.inputs[kk + j]);
            for (std::size_t p = 0; p < g.size(); ++p)
              dz.data()[p] += n.weights[j] * g.data()[p];
          }
          if (nodes_[n.inputs[j]].needs_grad)
            ensure_grad(n.inputs[j])(0, 0) += n.weights[j] * (dots[j] - mix);
        }
        break;
      }
      case Op::average_stack: {
        for (std::size_t j = 0; j < n.inputs.size(); ++j) {
          if (!nodes_[n.inputs[j]].needs_grad) continue;
          DenseMatrix& dz = ensure_grad(n.inputs[j]);
          for (std::size_t p = 0; p < g.size(); ++p)
            dz.data()[p] += n.weights[j] * g.data()[p];
        }
        break;
      }
      case Op::joint_loss: {
        const std::size_t kk = n.inputs.size() - 1;
        const double wst = g(0, 0) * n.epsilon / static_cast<double>(kk);
        for (std::size_t j = 0; j < kk; ++j)
          if (nodes_[n.inputs[j]].needs_grad) ensure_grad(n.inputs[j])(0, 0) += wst;
        if (nodes_[n.inputs[kk]].needs_grad)
          ensure_grad(n.inputs[kk])(0, 0) += g(0, 0) * (1.0 - n.epsilon);
        break;
      }
    }
  }
}

GradResult grad(const MultiViewNetwork& network, const EncoderInputs& inputs,
                const ModelParams& params, const HyperParams& hp) {
  hp.validate();
  if (hp.K != network.n_views())
    throw ValidationError("grad: K differs from the network's view count");
  params.validate_shapes(hp, network.d);

  GradientTape tape;
  using ValueId = GradientTape::ValueId;

  std::vector<std::vector<ValueId>> enc_ids(hp.K);
  for (std::size_t vk = 0; vk < hp.K; ++vk)
    for (const DenseMatrix& w : params.enc_weights[vk]) enc_ids[vk].push_back(tape.param(&w));
  const ValueId attn_W = tape.param(&params.attn_W);
  const ValueId attn_b = tape.param(&params.attn_b);
  const ValueId attn_q = tape.param(&params.attn_q);
  const ValueId dec_W = tape.param(&params.dec_W);

  std::uint64_t hash = 1469598103934665603ull;
  auto act = [&](ValueId pre) {
    if (hp.activation == Activation::identity) return pre;
    const ValueId out = tape.relu(pre);
    hash = fold_mask_hash(hash, tape.relu_mask(out));
    return out;
  };

  std::vector<ValueId> z_ids;
  for (std::size_t vk = 0; vk < hp.K; ++vk) {
    if (hp.encoder == EncoderMode::simplified) {
      if (inputs.propagated.size() != hp.K)
        throw ValidationError("grad: propagated inputs missing");
      const ValueId p = tape.input(&inputs.propagated[vk]);
      z_ids.push_back(act(tape.matmul(p, enc_ids[vk][0])));
    } else {
      ValueId h = tape.input(&network.attributes);
      for (std::size_t l = 0; l < hp.L; ++l)
        h = act(tape.matmul(tape.spmm_sym(&network.views[vk].norm(), h), enc_ids[vk][l]));
      z_ids.push_back(h);
    }
  }

  ValueId fused;
  if (hp.fusion == FusionMode::attention) {
    std::vector<ValueId> scores;
    for (std::size_t vk = 0; vk < hp.K; ++vk) {
      const ValueId hidden =
          tape.tanh_op(tape.add_row_bias(tape.matmul(z_ids[vk], attn_W), attn_b));
      scores.push_back(tape.mean_all(tape.matmul(hidden, attn_q)));
    }
    fused = tape.softmax_weighted_sum(scores, z_ids);
  } else {
    fused = tape.average_stack(z_ids);
  }

  std::vector<ValueId> structure_ids;
  for (std::size_t vk = 0; vk < hp.K; ++vk)
    structure_ids.push_back(
        tape.sigmoid_gram_l1(z_ids[vk], &network.views[vk].adjacency, hp.block_rows));

  const ValueId xhat = act(tape.matmul(tape.spmm_sym(&inputs.union_norm, fused), dec_W));
  const ValueId attr_loss = tape.frobenius_loss(xhat, &network.attributes);
  const ValueId total = tape.joint_loss(structure_ids, attr_loss, hp.epsilon);

  tape.backward(total);

  GradResult result;
  result.grads = ModelParams::zeros_like(params);
  auto take = [&](ValueId id, DenseMatrix& dst) {
    if (tape.has_grad(id)) dst = tape.grad(id);
  };
  for (std::size_t vk = 0; vk < hp.K; ++vk)
    for (std::size_t l = 0; l < enc_ids[vk].size(); ++l)
      take(enc_ids[vk][l], result.grads.enc_weights[vk][l]);
  take(attn_W, result.grads.attn_W);
  take(attn_b, result.grads.attn_b);
  take(attn_q, result.grads.attn_q);
  take(dec_W, result.grads.dec_W);

  bool finite = true;
  result.grads.for_each_tensor([&](const std::string&, const DenseMatrix& m) {
    if (!m.all_finite()) finite = false;
  });
  if (!finite) throw NumericError("grad: non-finite gradient");

  ForwardOutputs& fo = result.outputs;
  for (ValueId z : z_ids) fo.per_view_Z.push_back(tape.value(z));
  fo.fused_Z = tape.value(fused);
  fo.attn_weights = tape.alpha(fused);
  fo.recon_X = tape.value(xhat);
  for (ValueId s : structure_ids) {
    fo.loss_structure.push_back(tape.value(s)(0, 0));
    fo.structure_row_errors.push_back(tape.row_errors(s));
  }
  fo.attr_row_errors = tape.row_errors(attr_loss);
  fo.loss_attribute = tape.value(attr_loss)(0, 0);
  fo.loss_structure_mean = k::sum_ordered(fo.loss_structure) / static_cast<double>(hp.K);
  fo.loss_total = tape.value(total)(0, 0);
  fo.relu_pattern_hash = hash;
  return result;
}

}  // namespace mvad
