#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvad/dense.hpp"
#include "mvad/graph.hpp"
#include "mvad/rng.hpp"

namespace mvad {

enum class FusionMode { attention, average };
enum class EncoderMode { simplified, multilayer };
enum class Activation { relu, identity };

std::string to_string(FusionMode m);
std::string to_string(EncoderMode m);
std::string to_string(Activation a);
FusionMode fusion_from_string(const std::string& s);
EncoderMode encoder_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

struct HyperParams {
  std::size_t K = 1;           // view count, must match the network
  std::size_t L = 3;           // filter order / layer count
  std::size_t F_L = 30;        // embedding dimension
  std::size_t F_A = 30;        // attention hidden dimension
  double epsilon = 0.5;        // structure/attribute balance in (0,1)
  FusionMode fusion = FusionMode::attention;
  EncoderMode encoder = EncoderMode::simplified;
  Activation activation = Activation::relu;
  double learning_rate = 0.001;
  std::size_t epochs = 300;
  std::uint64_t seed = 1;
  std::size_t block_rows = 256;  // row block size for the structure decoder

  std::size_t enc_layers() const { return encoder == EncoderMode::multilayer ? L : 1; }
  void validate() const;
};

// All trainable tensors. enc_weights[k] holds one matrix in simplified mode
// (d x F_L) and L matrices in multilayer mode (d x F_L then F_L x F_L).
struct ModelParams {
  std::vector<std::vector<DenseMatrix>> enc_weights;
  DenseMatrix attn_W;  // F_L x F_A
  DenseMatrix attn_b;  // 1 x F_A
  DenseMatrix attn_q;  // F_A x 1
  DenseMatrix dec_W;   // F_L x d

  static ModelParams glorot(const HyperParams& hp, std::size_t d, Rng& rng);
  static ModelParams zeros_like(const ModelParams& shape);

  void for_each_tensor(const std::function<void(const std::string&, DenseMatrix&)>& f);
  void for_each_tensor(
      const std::function<void(const std::string&, const DenseMatrix&)>& f) const;

  std::size_t coordinate_count() const;
  std::uint64_t checksum() const;  // FNV-1a over the raw value bytes
  void validate_shapes(const HyperParams& hp, std::size_t d) const;
};

// Parameter-free per-dataset precomputation shared across training steps.
struct EncoderInputs {
  std::vector<DenseMatrix> propagated;  // simplified mode: per-view (A~)^L X
  SparseMatrix union_norm;              // normalize(union_adjacency)
};

EncoderInputs prepare_inputs(const MultiViewNetwork& network, const HyperParams& hp);

struct ForwardOutputs {
  std::vector<DenseMatrix> per_view_Z;
  DenseMatrix fused_Z;
  std::vector<double> attn_weights;
  DenseMatrix recon_X;
  std::vector<double> loss_structure;  // per view, sum of absolute entries
  double loss_structure_mean = 0.0;
  double loss_attribute = 0.0;  // squared Frobenius norm
  double loss_total = 0.0;
  std::vector<std::vector<double>> structure_row_errors;  // per view, length n
  std::vector<double> attr_row_errors;                    // length n
  // Hash of every relu on/off pattern in evaluation order; two evaluations
  // with equal hashes took identical kink branches everywhere.
  std::uint64_t relu_pattern_hash = 0;
};

// Collects relu masks for the pattern hash when non-null.
using MaskSink = std::function<void(const std::vector<unsigned char>&)>;

DenseMatrix encode_view(const MultiViewNetwork& network, const EncoderInputs& inputs,
                        std::size_t view_index, const ModelParams& params,
                        const HyperParams& hp, const MaskSink* masks = nullptr);

std::pair<DenseMatrix, std::vector<double>> fuse(const std::vector<DenseMatrix>& per_view_Z,
                                                 const ModelParams& params,
                                                 const HyperParams& hp);

double decode_structure(const DenseMatrix& z_view, const SparseMatrix& target,
                        std::size_t block_rows, std::vector<double>* row_errors = nullptr);

DenseMatrix decode_attributes(const DenseMatrix& fused_Z, const SparseMatrix& union_norm,
                              const ModelParams& params, Activation g,
                              const MaskSink* masks = nullptr);

ForwardOutputs forward(const MultiViewNetwork& network, const EncoderInputs& inputs,
                       const ModelParams& params, const HyperParams& hp);

// score_i = epsilon * mean_k structure_row_errors[k][i]
//         + (1 - epsilon) * attr_row_errors[i]
// Scores decompose loss_total node-wise: their sum equals it.
std::vector<double> assemble_scores(const std::vector<std::vector<double>>& structure_row_errors,
                                    const std::vector<double>& attr_row_errors, double epsilon);

std::vector<double> anomaly_scores(const MultiViewNetwork& network, const EncoderInputs& inputs,
                                   const ModelParams& params, const HyperParams& hp);

std::uint64_t fold_mask_hash(std::uint64_t h, const std::vector<unsigned char>& mask);

}  // namespace mvad
