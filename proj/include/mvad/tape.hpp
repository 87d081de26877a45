#pragma once

#include <cstddef>
#include <vector>

#include "mvad/dense.hpp"
#include "mvad/model.hpp"
#include "mvad/sparse.hpp"

namespace mvad {

// Define-by-run reverse-mode tape over the primitives the model needs.
// Values are computed eagerly at record time with the same kernels the plain
// forward pass uses, so taped outputs are bitwise identical to forward().
// Leaf matrices are referenced, not copied; they must outlive the tape.
class GradientTape {
 public:
  using ValueId = std::size_t;

  GradientTape();
  ~GradientTape();
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  ValueId input(const DenseMatrix* value);  // constant, no gradient
  ValueId param(const DenseMatrix* value);  // differentiable leaf

  ValueId matmul(ValueId a, ValueId b);
  // s must be symmetric (the normalized adjacencies are); backward reuses s.
  ValueId spmm_sym(const SparseMatrix* s, ValueId b);
  ValueId add_row_bias(ValueId a, ValueId bias);
  ValueId relu(ValueId a);
  ValueId tanh_op(ValueId a);
  ValueId mean_all(ValueId a);  // 1x1
  ValueId sigmoid_gram_l1(ValueId z, const SparseMatrix* target, std::size_t block_rows);
  ValueId frobenius_loss(ValueId xhat, const DenseMatrix* x);
  ValueId softmax_weighted_sum(const std::vector<ValueId>& scores,
                               const std::vector<ValueId>& zs);
  ValueId average_stack(const std::vector<ValueId>& zs);
  // epsilon * mean(structure) + (1 - epsilon) * attribute
  ValueId joint_loss(const std::vector<ValueId>& structure, ValueId attribute, double epsilon);

  const DenseMatrix& value(ValueId v) const;
  const std::vector<double>& row_errors(ValueId v) const;      // gram / frobenius nodes
  const std::vector<double>& alpha(ValueId v) const;           // softmax node
  const std::vector<unsigned char>& relu_mask(ValueId v) const;
  std::size_t size() const;

  // Seeds d(root)=1 and accumulates gradients in reverse recording order.
  void backward(ValueId root);
  bool has_grad(ValueId v) const;
  const DenseMatrix& grad(ValueId v) const;

 private:
  struct Node;
  std::vector<Node> nodes_;

  ValueId push(Node&& node);
  DenseMatrix& ensure_grad(ValueId v);
};

struct GradResult {
  ModelParams grads;  // same shapes as the parameters
  ForwardOutputs outputs;
};

// Gradient of loss_total with respect to every parameter tensor.
GradResult grad(const MultiViewNetwork& network, const EncoderInputs& inputs,
                const ModelParams& params, const HyperParams& hp);

}  // namespace mvad
