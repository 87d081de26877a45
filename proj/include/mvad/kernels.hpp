#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvad/dense.hpp"
#include "mvad/sparse.hpp"

// Numeric kernel layer. Every kernel parallelizes over independent output
// rows (or columns) with a sequential inner accumulation, so results are
// bitwise identical for any thread count and to the serial mirrors below.
namespace mvad::kernels {

void set_num_threads(int n);  // n <= 0 restores the library default
int max_threads();

double sigmoid_clamped(double x);        // sigmoid of clamp(x, -30, 30)
double sigmoid_clamped_deriv(double x);  // 0 outside the clamp

// out = a * b
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = a^T * b
void matmul_atb(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = a * b^T
void matmul_abt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = s * b
void spmm(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& out);
// out = s * v
void spmv(const SparseMatrix& s, const std::vector<double>& v, std::vector<double>& out);
// out_ij = a_ij + bias_0j  (bias is 1 x n_cols)
void add_row_bias(const DenseMatrix& a, const DenseMatrix& bias, DenseMatrix& out);
// out_0j = sum_i a_ij, rows accumulated in ascending order
void col_sums(const DenseMatrix& a, DenseMatrix& out);

void relu(const DenseMatrix& a, DenseMatrix& out);
// mask_p = 1 where a_p > 0 (flat row-major index)
void relu_with_mask(const DenseMatrix& a, DenseMatrix& out, std::vector<unsigned char>& mask);
void tanh_mat(const DenseMatrix& a, DenseMatrix& out);
void sigmoid_mat(const DenseMatrix& a, DenseMatrix& out);

// out = sum_k alpha_k * z_k, the k loop innermost so view order is fixed
void weighted_sum(const std::vector<const DenseMatrix*>& zs,
                  const std::vector<double>& alpha, DenseMatrix& out);

// row_errors_i = sum_j (xhat_ij - x_ij)^2
void frobenius_row_errors(const DenseMatrix& xhat, const DenseMatrix& x,
                          std::vector<double>& row_errors);

// row_errors_i = sum_j |target_ij - sigmoid(z_i . z_j)| over all j including
// the diagonal (target 0 there). Processes block_rows rows at a time so only
// an O(block_rows * n) slice of the Gram matrix is ever materialized.
void sigmoid_gram_row_errors(const DenseMatrix& z, const SparseMatrix& target,
                             std::size_t block_rows, std::vector<double>& row_errors);

// dz += upstream * d/dz [ sum_ij |target_ij - sigmoid(z_i . z_j)| ]
// Uses the symmetry of the Gram matrix: dz_i = 2 * sum_j f'(p_ij) z_j,
// so each block writes only its own rows of dz.
void sigmoid_gram_l1_grad(const DenseMatrix& z, const SparseMatrix& target,
                          double upstream, std::size_t block_rows, DenseMatrix& dz);

// Serial reductions with a fixed index order; used for every loss so totals
// do not depend on the thread count.
double sum_ordered(const std::vector<double>& v);
std::vector<double> softmax(const std::vector<double>& v);

// Single-threaded mirrors driving the same per-row workers; kept as the
// reference implementations for the bitwise-equality tests and the benchmark.
namespace serial {
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_atb(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void matmul_abt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
void spmm(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& out);
void add_row_bias(const DenseMatrix& a, const DenseMatrix& bias, DenseMatrix& out);
void col_sums(const DenseMatrix& a, DenseMatrix& out);
void relu(const DenseMatrix& a, DenseMatrix& out);
void tanh_mat(const DenseMatrix& a, DenseMatrix& out);
void weighted_sum(const std::vector<const DenseMatrix*>& zs,
                  const std::vector<double>& alpha, DenseMatrix& out);
void frobenius_row_errors(const DenseMatrix& xhat, const DenseMatrix& x,
                          std::vector<double>& row_errors);
void sigmoid_gram_row_errors(const DenseMatrix& z, const SparseMatrix& target,
                             std::size_t block_rows, std::vector<double>& row_errors);
void sigmoid_gram_l1_grad(const DenseMatrix& z, const SparseMatrix& target,
                          double upstream, std::size_t block_rows, DenseMatrix& dz);
}  // namespace serial

}  // namespace mvad::kernels
