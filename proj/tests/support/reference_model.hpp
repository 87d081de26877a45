#pragma once

// Straight-line reimplementation of the whole forward pass on plain nested
// vectors, written without the library's kernel layer so the two codepaths
// share nothing but the input types. Used as the loss oracle.

#include <cmath>
#include <cstddef>
#include <vector>

#include "mvad/graph.hpp"
#include "mvad/model.hpp"

namespace support::reference {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat to_mat(const mvad::DenseMatrix& m) {
  Mat out = zeros(m.n_rows(), m.n_cols());
  for (std::size_t i = 0; i < m.n_rows(); ++i)
    for (std::size_t j = 0; j < m.n_cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Mat dense_adjacency(const mvad::SparseMatrix& s) {
  Mat out = zeros(s.n_rows, s.n_cols);
  for (std::size_t i = 0; i < s.n_rows; ++i)
    for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p)
      out[i][s.col_indices[p]] = s.values[p];
  return out;
}

// D~^{-1/2} (A + I) D~^{-1/2} computed densely.
inline Mat normalize_dense(const Mat& a) {
  const std::size_t n = a.size();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (std::size_t j = 0; j < n; ++j) deg += a[i][j];
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Mat out = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = a[i][j] + (i == j ? 1.0 : 0.0);
      out[i][j] = v * inv_sqrt[i] * inv_sqrt[j];
    }
  return out;
}

inline Mat mul(const Mat& a, const Mat& b) {
  const std::size_t r = a.size(), inner = b.size(), c = b[0].size();
  Mat out = zeros(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  return out;
}

inline Mat activate(Mat m, mvad::Activation g) {
  if (g == mvad::Activation::relu)
    for (auto& row : m)
      for (double& v : row) v = v > 0.0 ? v : 0.0;
  return m;
}

inline double sigmoid(double x) {
  if (x > 30.0) x = 30.0;
  if (x < -30.0) x = -30.0;
  return 1.0 / (1.0 + std::exp(-x));
}

struct Result {
  std::vector<Mat> per_view_Z;
  Mat fused_Z;
  std::vector<double> alpha;
  std::vector<double> loss_structure;
  double loss_structure_mean = 0.0;
  double loss_attribute = 0.0;
  double loss_total = 0.0;
  std::vector<double> scores;
};

inline Result evaluate(const mvad::MultiViewNetwork& net, const mvad::ModelParams& params,
                       const mvad::HyperParams& hp) {
  const std::size_t n = net.n;
  const std::size_t K = net.views.size();
  Result res;

  Mat x = to_mat(net.attributes);

  std::vector<Mat> dense_a(K);
  for (std::size_t k = 0; k < K; ++k) {
    dense_a[k] = dense_adjacency(net.views[k].adjacency);
    Mat norm = normalize_dense(dense_a[k]);
    Mat z;
    if (hp.encoder == mvad::EncoderMode::simplified) {
      Mat p = x;
      for (std::size_t l = 0; l < hp.L; ++l) p = mul(norm, p);
      z = activate(mul(p, to_mat(params.enc_weights[k][0])), hp.activation);
    } else {
      z = x;
      for (std::size_t l = 0; l < hp.L; ++l)
        z = activate(mul(mul(norm, z), to_mat(params.enc_weights[k][l])), hp.activation);
    }
    res.per_view_Z.push_back(std::move(z));
  }

  if (hp.fusion == mvad::FusionMode::attention) {
    Mat w = to_mat(params.attn_W);
    Mat q = to_mat(params.attn_q);
    std::vector<double> e(K);
    for (std::size_t k = 0; k < K; ++k) {
      Mat h = mul(res.per_view_Z[k], w);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h[i].size(); ++j)
          h[i][j] = std::tanh(h[i][j] + params.attn_b(0, j));
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < h[i].size(); ++j) s += h[i][j] * q[j][0];
        total += s;
      }
      e[k] = total / static_cast<double>(n);
    }
    double denom = 0.0;
    res.alpha.resize(K);
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(e[k]);
    for (std::size_t k = 0; k < K; ++k) res.alpha[k] = std::exp(e[k]) / denom;
  } else {
    res.alpha.assign(K, 1.0 / static_cast<double>(K));
  }

  res.fused_Z = zeros(n, hp.F_L);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < hp.F_L; ++j)
        res.fused_Z[i][j] += res.alpha[k] * res.per_view_Z[k][i][j];

  std::vector<std::vector<double>> structure_rows(K);
  for (std::size_t k = 0; k < K; ++k) {
    const Mat& z = res.per_view_Z[k];
    structure_rows[k].assign(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double p = 0.0;
        for (std::size_t f = 0; f < hp.F_L; ++f) p += z[i][f] * z[j][f];
        row += std::fabs(dense_a[k][i][j] - sigmoid(p));
      }
      structure_rows[k][i] = row;
      total += row;
    }
    res.loss_structure.push_back(total);
  }
  for (double v : res.loss_structure) res.loss_structure_mean += v;
  res.loss_structure_mean /= static_cast<double>(K);

  // Union graph: an edge exists where any view has it.
  Mat union_a = zeros(n, n);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (dense_a[k][i][j] != 0.0) union_a[i][j] = 1.0;
  Mat xhat = activate(mul(mul(normalize_dense(union_a), res.fused_Z), to_mat(params.dec_W)),
                      hp.activation);

  std::vector<double> attr_rows(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < net.d; ++j) {
      double diff = xhat[i][j] - x[i][j];
      row += diff * diff;
    }
    attr_rows[i] = row;
    res.loss_attribute += row;
  }

  res.loss_total = hp.epsilon * res.loss_structure_mean + (1.0 - hp.epsilon) * res.loss_attribute;

  res.scores.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += structure_rows[k][i];
    res.scores[i] =
        hp.epsilon * s / static_cast<double>(K) + (1.0 - hp.epsilon) * attr_rows[i];
  }
  return res;
}

}  // namespace support::reference
