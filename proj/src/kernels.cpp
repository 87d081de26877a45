#include "mvad/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#define MVAD_PAR_FOR _Pragma("omp parallel for schedule(static)")
#else
#define MVAD_PAR_FOR
#endif

namespace mvad::kernels {

namespace {

// s = sigmoid(clamp(x, -30, 30)), sd = its derivative in x (0 outside clamp).
inline void sigmoid_pair(double x, double& s, double& sd) {
  if (x > 30.0) {
    s = 1.0 / (1.0 + std::exp(-30.0));
    sd = 0.0;
    return;
  }
  if (x < -30.0) {
    s = 1.0 / (1.0 + std::exp(30.0));
    sd = 0.0;
    return;
  }
  s = 1.0 / (1.0 + std::exp(-x));
  sd = s * (1.0 - s);
}

void check_matmul(const DenseMatrix& a, const DenseMatrix& b, const char* who) {
  if (a.n_cols() != b.n_rows())
    throw ValidationError(std::string(who) + ": inner dimensions differ");
}

// out.row(i) = a.row(i) * b, accumulated over k ascending
inline void matmul_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                       std::size_t i) {
  const std::size_t kk = a.n_cols(), nn = b.n_cols();
  double* orow = out.row(i);
  std::fill(orow, orow + nn, 0.0);
  const double* arow = a.row(i);
  for (std::size_t k = 0; k < kk; ++k) {
    const double aik = arow[k];
    const double* brow = b.row(k);
    for (std::size_t j = 0; j < nn; ++j) orow[j] += aik * brow[j];
  }
}

// out.row(r) = column r of a, dotted against b rows, accumulated over i ascending
inline void matmul_atb_row(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                           std::size_t r) {
  const std::size_t mm = a.n_rows(), nn = b.n_cols();
  double* orow = out.row(r);
  std::fill(orow, orow + nn, 0.0);
  for (std::size_t i = 0; i < mm; ++i) {
    const double w = a(i, r);
    const double* brow = b.row(i);
    for (std::size_t j = 0; j < nn; ++j) orow[j] += w * brow[j];
  }
}

// dest[j] = a.row(ai) . b.row(j) for all j, each dot over t ascending
inline void abt_row(const DenseMatrix& a, std::size_t ai, const DenseMatrix& b, double* dest) {
  const std::size_t kk = a.n_cols(), nn = b.n_rows();
  const double* arow = a.row(ai);
  for (std::size_t j = 0; j < nn; ++j) {
    const double* brow = b.row(j);
    double acc = 0.0;
    for (std::size_t t = 0; t < kk; ++t) acc += arow[t] * brow[t];
    dest[j] = acc;
  }
}

inline void spmm_row(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& out,
                     std::size_t i) {
  const std::size_t nn = b.n_cols();
  double* orow = out.row(i);
  std::fill(orow, orow + nn, 0.0);
  for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p) {
    const double v = s.values[p];
    const double* brow = b.row(s.col_indices[p]);
    for (std::size_t j = 0; j < nn; ++j) orow[j] += v * brow[j];
  }
}

inline double gram_row_error(const double* prow, const SparseMatrix& target, std::size_t i,
                             std::size_t n) {
  double acc = 0.0;
  std::size_t p = target.row_offsets[i];
  const std::size_t pe = target.row_offsets[i + 1];
  for (std::size_t j = 0; j < n; ++j) {
    double a = 0.0;
    if (p < pe && target.col_indices[p] == j) a = target.values[p], ++p;
    double s, sd;
    sigmoid_pair(prow[j], s, sd);
    acc += std::abs(a - s);
  }
  return acc;
}

// dzrow += coef * sum_j f'(p_ij) z_j with f' = sigmoid' * sign(sigmoid - a)
inline void gram_grad_row(const double* prow, const SparseMatrix& target, std::size_t i,
                          const DenseMatrix& z, double coef, double* dzrow) {
  const std::size_t n = z.n_rows(), f = z.n_cols();
  std::size_t p = target.row_offsets[i];
  const std::size_t pe = target.row_offsets[i + 1];
  for (std::size_t j = 0; j < n; ++j) {
    double a = 0.0;
    if (p < pe && target.col_indices[p] == j) a = target.values[p], ++p;
    double s, sd;
    sigmoid_pair(prow[j], s, sd);
    const double fp = s > a ? sd : (s < a ? -sd : 0.0);
    if (fp == 0.0) continue;
    const double w = coef * fp;
    const double* zj = z.row(j);
    for (std::size_t t = 0; t < f; ++t) dzrow[t] += w * zj[t];
  }
}

void check_gram(const DenseMatrix& z, const SparseMatrix& target, const char* who) {
  if (target.n_rows != target.n_cols)
    throw ValidationError(std::string(who) + ": target must be square");
  if (z.n_rows() != target.n_rows)
    throw ValidationError(std::string(who) + ": row count differs from target dimension");
}

template <bool Parallel>
void gram_row_errors_impl(const DenseMatrix& z, const SparseMatrix& target,
                          std::size_t block_rows, std::vector<double>& row_errors) {
  check_gram(z, target, "sigmoid_gram_row_errors");
  const std::size_t n = z.n_rows();
  row_errors.assign(n, 0.0);
  if (n == 0) return;
  const std::size_t bs = std::min(std::max<std::size_t>(block_rows, 1), n);
  DenseMatrix pblock(bs, n);
  for (std::size_t r0 = 0; r0 < n; r0 += bs) {
    const std::int64_t r1 = static_cast<std::int64_t>(std::min(r0 + bs, n));
    if constexpr (Parallel) {
      MVAD_PAR_FOR
      for (std::int64_t i = static_cast<std::int64_t>(r0); i < r1; ++i) {
        double* prow = pblock.row(static_cast<std::size_t>(i) - r0);
        abt_row(z, static_cast<std::size_t>(i), z, prow);
        row_errors[static_cast<std::size_t>(i)] =
            gram_row_error(prow, target, static_cast<std::size_t>(i), n);
      }
    } else {
      for (std::int64_t i = static_cast<std::int64_t>(r0); i < r1; ++i) {
        double* prow = pblock.row(static_cast<std::size_t>(i) - r0);
        abt_row(z, static_cast<std::size_t>(i), z, prow);
        row_errors[static_cast<std::size_t>(i)] =
            gram_row_error(prow, target, static_cast<std::size_t>(i), n);
      }
    }
  }
}

template <bool Parallel>
void gram_l1_grad_impl(const DenseMatrix& z, const SparseMatrix& target, double upstream,
                       std::size_t block_rows, DenseMatrix& dz) {
  check_gram(z, target, "sigmoid_gram_l1_grad");
  if (!dz.same_shape(z))
    throw ValidationError("sigmoid_gram_l1_grad: gradient shape differs from z");
  const std::size_t n = z.n_rows();
  if (n == 0) return;
  const double coef = 2.0 * upstream;  // both orientations of each pair, by symmetry
  const std::size_t bs = std::min(std::max<std::size_t>(block_rows, 1), n);
  DenseMatrix pblock(bs, n);
  for (std::size_t r0 = 0; r0 < n; r0 += bs) {
    const std::int64_t r1 = static_cast<std::int64_t>(std::min(r0 + bs, n));
    if constexpr (Parallel) {
      MVAD_PAR_FOR
      for (std::int64_t i = static_cast<std::int64_t>(r0); i < r1; ++i) {
        double* prow = pblock.row(static_cast<std::size_t>(i) - r0);
        abt_row(z, static_cast<std::size_t>(i), z, prow);
        gram_grad_row(prow, target, static_cast<std::size_t>(i), z, coef,
                      dz.row(static_cast<std::size_t>(i)));
      }
    } else {
      for (std::int64_t i = static_cast<std::int64_t>(r0); i < r1; ++i) {
        double* prow = pblock.row(static_cast<std::size_t>(i) - r0);
        abt_row(z, static_cast<std::size_t>(i), z, prow);
        gram_grad_row(prow, target, static_cast<std::size_t>(i), z, coef,
                      dz.row(static_cast<std::size_t>(i)));
      }
    }
  }
}

}  // namespace

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

double sigmoid_clamped(double x) {
  double s, sd;
  sigmoid_pair(x, s, sd);
  return s;
}

double sigmoid_clamped_deriv(double x) {
  double s, sd;
  sigmoid_pair(x, s, sd);
  return sd;
}

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  check_matmul(a, b, "matmul");
  out = DenseMatrix(a.n_rows(), b.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_atb(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.n_rows() != b.n_rows())
    throw ValidationError("matmul_atb: row counts differ");
  out = DenseMatrix(a.n_cols(), b.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(a.n_cols());
  MVAD_PAR_FOR
  for (std::int64_t r = 0; r < m; ++r) matmul_atb_row(a, b, out, static_cast<std::size_t>(r));
}

void matmul_abt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.n_cols() != b.n_cols())
    throw ValidationError("matmul_abt: column counts differ");
  out = DenseMatrix(a.n_rows(), b.n_rows());
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) abt_row(a, static_cast<std::size_t>(i), b, out.row(static_cast<std::size_t>(i)));
}

void spmm(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& out) {
  if (s.n_cols != b.n_rows())
    throw ValidationError("spmm: inner dimensions differ");
  out = DenseMatrix(s.n_rows, b.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(s.n_rows);
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) spmm_row(s, b, out, static_cast<std::size_t>(i));
}

void spmv(const SparseMatrix& s, const std::vector<double>& v, std::vector<double>& out) {
  if (s.n_cols != v.size())
    throw ValidationError("spmv: dimension mismatch");
  out.assign(s.n_rows, 0.0);
  const std::int64_t m = static_cast<std::int64_t>(s.n_rows);
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t p = s.row_offsets[i]; p < s.row_offsets[i + 1]; ++p)
      acc += s.values[p] * v[s.col_indices[p]];
    out[static_cast<std::size_t>(i)] = acc;
  }
}

void add_row_bias(const DenseMatrix& a, const DenseMatrix& bias, DenseMatrix& out) {
  if (bias.n_rows() != 1 || bias.n_cols() != a.n_cols())
    throw ValidationError("add_row_bias: bias must be 1 x n_cols");
  out = DenseMatrix(a.n_rows(), a.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    const double* brow = bias.row(0);
    double* orow = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.n_cols(); ++j) orow[j] = arow[j] + brow[j];
  }
}

void col_sums(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(1, a.n_cols());
  const std::int64_t nc = static_cast<std::int64_t>(a.n_cols());
  MVAD_PAR_FOR
  for (std::int64_t j = 0; j < nc; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.n_rows(); ++i) acc += a(i, static_cast<std::size_t>(j));
    out(0, static_cast<std::size_t>(j)) = acc;
  }
}

void relu(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(a.n_rows(), a.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    double* orow = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.n_cols(); ++j) orow[j] = arow[j] > 0.0 ? arow[j] : 0.0;
  }
}

void relu_with_mask(const DenseMatrix& a, DenseMatrix& out, std::vector<unsigned char>& mask) {
  out = DenseMatrix(a.n_rows(), a.n_cols());
  mask.assign(a.size(), 0);
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * a.n_cols();
    const double* arow = a.row(static_cast<std::size_t>(i));
    double* orow = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.n_cols(); ++j) {
      const bool on = arow[j] > 0.0;
      orow[j] = on ? arow[j] : 0.0;
      mask[base + j] = on ? 1 : 0;
    }
  }
}

void tanh_mat(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(a.n_rows(), a.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    double* orow = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.n_cols(); ++j) orow[j] = std::tanh(arow[j]);
  }
}

void sigmoid_mat(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(a.n_rows(), a.n_cols());
  const std::int64_t m = static_cast<std::int64_t>(a.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a.row(static_cast<std::size_t>(i));
    double* orow = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.n_cols(); ++j) orow[j] = sigmoid_clamped(arow[j]);
  }
}

void weighted_sum(const std::vector<const DenseMatrix*>& zs, const std::vector<double>& alpha,
                  DenseMatrix& out) {
  if (zs.empty() || zs.size() != alpha.size())
    throw ValidationError("weighted_sum: need one weight per matrix");
  for (const DenseMatrix* z : zs)
    if (!z->same_shape(*zs[0])) throw ValidationError("weighted_sum: shapes differ");
  out = DenseMatrix(zs[0]->n_rows(), zs[0]->n_cols());
  const std::int64_t m = static_cast<std::int64_t>(out.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    double* orow = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < out.n_cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < zs.size(); ++k)
        acc += alpha[k] * zs[k]->row(static_cast<std::size_t>(i))[j];
      orow[j] = acc;
    }
  }
}

void frobenius_row_errors(const DenseMatrix& xhat, const DenseMatrix& x,
                          std::vector<double>& row_errors) {
  if (!xhat.same_shape(x))
    throw ValidationError("frobenius_row_errors: shapes differ");
  row_errors.assign(xhat.n_rows(), 0.0);
  const std::int64_t m = static_cast<std::int64_t>(xhat.n_rows());
  MVAD_PAR_FOR
  for (std::int64_t i = 0; i < m; ++i) {
    const double* hrow = xhat.row(static_cast<std::size_t>(i));
    const double* xrow = x.row(static_cast<std::size_t>(i));
    double acc = 0.0;
    for (std::size_t j = 0; j < xhat.n_cols(); ++j) {
      const double dd = hrow[j] - xrow[j];
      acc += dd * dd;
    }
    row_errors[static_cast<std::size_t>(i)] = acc;
  }
}

void sigmoid_gram_row_errors(const DenseMatrix& z, const SparseMatrix& target,
                             std::size_t block_rows, std::vector<double>& row_errors) {
  gram_row_errors_impl<true>(z, target, block_rows, row_errors);
}

void sigmoid_gram_l1_grad(const DenseMatrix& z, const SparseMatrix& target, double upstream,
                          std::size_t block_rows, DenseMatrix& dz) {
  gram_l1_grad_impl<true>(z, target, upstream, block_rows, dz);
}

double sum_ordered(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) throw ValidationError("softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

namespace serial {

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  check_matmul(a, b, "matmul");
  out = DenseMatrix(a.n_rows(), b.n_cols());
  for (std::size_t i = 0; i < a.n_rows(); ++i) matmul_row(a, b, out, i);
}

void matmul_atb(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.n_rows() != b.n_rows())
    throw ValidationError("matmul_atb: row counts differ");
  out = DenseMatrix(a.n_cols(), b.n_cols());
  for (std::size_t r = 0; r < a.n_cols(); ++r) matmul_atb_row(a, b, out, r);
}

void matmul_abt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
  if (a.n_cols() != b.n_cols())
    throw ValidationError("matmul_abt: column counts differ");
  out = DenseMatrix(a.n_rows(), b.n_rows());
  for (std::size_t i = 0; i < a.n_rows(); ++i) abt_row(a, i, b, out.row(i));
}

void spmm(const SparseMatrix& s, const DenseMatrix& b, DenseMatrix& out) {
  if (s.n_cols != b.n_rows())
    throw ValidationError("spmm: inner dimensions differ");
  out = DenseMatrix(s.n_rows, b.n_cols());
  for (std::size_t i = 0; i < s.n_rows; ++i) spmm_row(s, b, out, i);
}

void add_row_bias(const DenseMatrix& a, const DenseMatrix& bias, DenseMatrix& out) {
  if (bias.n_rows() != 1 || bias.n_cols() != a.n_cols())
    throw ValidationError("add_row_bias: bias must be 1 x n_cols");
  out = DenseMatrix(a.n_rows(), a.n_cols());
  for (std::size_t i = 0; i < a.n_rows(); ++i)
    for (std::size_t j = 0; j < a.n_cols(); ++j) out(i, j) = a(i, j) + bias(0, j);
}

void col_sums(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(1, a.n_cols());
  for (std::size_t j = 0; j < a.n_cols(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.n_rows(); ++i) acc += a(i, j);
    out(0, j) = acc;
  }
}

void relu(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(a.n_rows(), a.n_cols());
  for (std::size_t p = 0; p < a.size(); ++p)
    out.data()[p] = a.data()[p] > 0.0 ? a.data()[p] : 0.0;
}

void tanh_mat(const DenseMatrix& a, DenseMatrix& out) {
  out = DenseMatrix(a.n_rows(), a.n_cols());
  for (std::size_t p = 0; p < a.size(); ++p) out.data()[p] = std::tanh(a.data()[p]);
}

void weighted_sum(const std::vector<const DenseMatrix*>& zs, const std::vector<double>& alpha,
                  DenseMatrix& out) {
  if (zs.empty() || zs.size() != alpha.size())
    throw ValidationError("weighted_sum: need one weight per matrix");
  out = DenseMatrix(zs[0]->n_rows(), zs[0]->n_cols());
  for (std::size_t i = 0; i < out.n_rows(); ++i)
    for (std::size_t j = 0; j < out.n_cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < zs.size(); ++k) acc += alpha[k] * (*zs[k])(i, j);
      out(i, j) = acc;
    }
}

void frobenius_row_errors(const DenseMatrix& xhat, const DenseMatrix& x,
                          std::vector<double>& row_errors) {
  if (!xhat.same_shape(x))
    throw ValidationError("frobenius_row_errors: shapes differ");
  row_errors.assign(xhat.n_rows(), 0.0);
  for (std::size_t i = 0; i < xhat.n_rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < xhat.n_cols(); ++j) {
      const double dd = xhat(i, j) - x(i, j);
      acc += dd * dd;
    }
    row_errors[i] = acc;
  }
}

void sigmoid_gram_row_errors(const DenseMatrix& z, const SparseMatrix& target,
                             std::size_t block_rows, std::vector<double>& row_errors) {
  gram_row_errors_impl<false>(z, target, block_rows, row_errors);
}

void sigmoid_gram_l1_grad(const DenseMatrix& z, const SparseMatrix& target, double upstream,
                          std::size_t block_rows, DenseMatrix& dz) {
  gram_l1_grad_impl<false>(z, target, upstream, block_rows, dz);
}

}  // namespace serial

}  // namespace mvad::kernels
