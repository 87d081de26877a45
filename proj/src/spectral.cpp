#include "mvad/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mvad/errors.hpp"
#include "mvad/io.hpp"
#include "mvad/kernels.hpp"
#include "mvad/rng.hpp"
#include "mvad/sparse.hpp"

namespace mvad {
namespace {

constexpr std::size_t kDenseLimit = 2000;
constexpr std::size_t kDefaultNumTop = 8;

// y = (I - A~) x
void apply_shifted_laplacian(const SparseMatrix& norm, const std::vector<double>& x,
                             std::vector<double>& y) {
  kernels::spmv(norm, x, y);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - y[i];
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void axpy(double c, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

void scale(std::vector<double>& x, double c) {
  for (double& v : x) v *= c;
}

// Two-pass modified Gram-Schmidt against both basis sets.
void orthogonalize(std::vector<double>& w, const std::vector<std::vector<double>>& basis_a,
                   const std::vector<std::vector<double>>& basis_b) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& u : basis_a) axpy(-dot(w, u), u, w);
    for (const auto& u : basis_b) axpy(-dot(w, u), u, w);
  }
}

void random_unit(Rng& rng, std::vector<double>& v) {
  for (double& x : v) x = rng.normal();
  double nrm = norm2(v);
  if (nrm == 0.0) {
    v[0] = 1.0;
    nrm = 1.0;
  }
  scale(v, 1.0 / nrm);
}

Eigen::MatrixXd dense_shifted_laplacian(const SparseMatrix& norm) {
  const std::size_t n = norm.n_rows;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = norm.row_offsets[i]; p < norm.row_offsets[i + 1]; ++p) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(norm.col_indices[p])) -=
          norm.values[p];
    }
  }
  return m;
}

}  // namespace

std::vector<double> laplacian_frequencies(const ViewGraph& view) {
  const std::size_t n = view.adjacency.n_rows;
  if (n > kDenseLimit) {
    throw ValidationError("full spectrum needs n <= " + std::to_string(kDenseLimit) +
                          ", got n = " + std::to_string(n) +
                          "; use the iterative extreme-frequency path");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense_shifted_laplacian(view.norm()),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed to converge");
  const auto& ev = solver.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

std::vector<double> filter_response(const std::vector<double>& frequencies, std::size_t L) {
  std::vector<double> out(frequencies.size());
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!std::isfinite(frequencies[i])) throw ValidationError("non-finite frequency");
    out[i] = std::pow(1.0 - frequencies[i], static_cast<double>(L));
  }
  return out;
}

ExtremeFrequencies extreme_frequencies(const ViewGraph& view, std::size_t num_top, double tol,
                                       std::size_t max_restarts) {
  const SparseMatrix& norm = view.norm();
  const std::size_t n = norm.n_rows;
  if (num_top == 0) throw ValidationError("num_top must be positive");
  if (2 * num_top > n) {
    throw ValidationError("num_top = " + std::to_string(num_top) + " asks for more than the " +
                          std::to_string(n) + " frequencies the graph has");
  }

  // Basis large enough that one pass usually resolves both spectrum ends.
  const std::size_t m = std::min(n, std::max<std::size_t>(2 * num_top + 10, 30));

  Rng rng(0x5eedb0075eedb007ULL);
  std::vector<std::vector<double>> locked;  // converged eigenvectors, orthonormal
  std::vector<double> locked_small, locked_large;

  std::vector<double> start(n);
  random_unit(rng, start);

  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<double> work(n);

  for (std::size_t restart = 0;; ++restart) {
    orthogonalize(start, locked, {});
    double snrm = norm2(start);
    if (snrm < 1e-12) {
      random_unit(rng, start);
      orthogonalize(start, locked, {});
      snrm = norm2(start);
    }
    scale(start, 1.0 / snrm);

    // Lanczos with full reorthogonalization against the basis and every
    // locked vector, so each restart works in the deflated subspace.
    std::vector<std::vector<double>> basis;
    basis.reserve(m);
    std::vector<double> alpha, beta;
    std::vector<double> v = start;
    for (std::size_t j = 0; j < m && basis.size() + locked.size() < n; ++j) {
      basis.push_back(v);
      apply_shifted_laplacian(norm, basis[j], work);
      alpha.push_back(dot(work, basis[j]));
      orthogonalize(work, basis, locked);
      double b = norm2(work);
      if (b < 1e-12) {
        // Invariant subspace hit; continue from a fresh direction with a
        // zero coupling entry in the tridiagonal matrix.
        random_unit(rng, work);
        orthogonalize(work, basis, locked);
        b = norm2(work);
        if (b < 1e-12) break;
        beta.push_back(0.0);
      } else {
        beta.push_back(b);
      }
      v = work;
      scale(v, 1.0 / b);
    }
    const std::size_t k = basis.size();
    if (k == 0) throw NumericError("extreme frequencies: no directions left to explore");

    Eigen::MatrixXd t =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      t(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = alpha[j];
      if (j + 1 < k) {
        t(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j + 1)) = beta[j];
        t(static_cast<Eigen::Index>(j + 1), static_cast<Eigen::Index>(j)) = beta[j];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
    if (solver.info() != Eigen::Success) throw NumericError("Ritz projection failed to converge");

    // Explicit Ritz pair for column idx of the tridiagonal eigenbasis.
    auto ritz_pair = [&](std::size_t idx, double& value, double& residual,
                         std::vector<double>& vec) {
      value = solver.eigenvalues()(static_cast<Eigen::Index>(idx));
      vec.assign(n, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        axpy(solver.eigenvectors()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(idx)),
             basis[j], vec);
      }
      double nrm = norm2(vec);
      if (nrm > 0.0) scale(vec, 1.0 / nrm);
      apply_shifted_laplacian(norm, vec, work);
      axpy(-value, vec, work);
      residual = norm2(work);
    };

    // Walk inward from each end of the deflated Ritz spectrum. Index 0 is
    // the next unclaimed smallest frequency because every previously locked
    // pair was projected out of the basis.
    std::vector<double> pending;
    std::size_t small_used = 0;
    bool blocked = false;
    while (locked_small.size() < num_top && small_used < k && !blocked) {
      double value, residual;
      std::vector<double> vec;
      ritz_pair(small_used, value, residual, vec);
      best_residual = std::min(best_residual, residual);
      if (residual <= tol) {
        locked.push_back(std::move(vec));
        locked_small.push_back(value);
        ++small_used;
      } else {
        if (pending.empty()) pending = std::move(vec);
        blocked = true;
      }
    }
    std::size_t large_used = 0;
    blocked = false;
    while (locked_large.size() < num_top && small_used + large_used < k && !blocked) {
      double value, residual;
      std::vector<double> vec;
      ritz_pair(k - 1 - large_used, value, residual, vec);
      best_residual = std::min(best_residual, residual);
      if (residual <= tol) {
        locked.push_back(std::move(vec));
        locked_large.push_back(value);
        ++large_used;
      } else {
        if (pending.empty()) pending = std::move(vec);
        blocked = true;
      }
    }

    if (locked_small.size() >= num_top && locked_large.size() >= num_top) break;
    if (restart == max_restarts) {
      std::ostringstream msg;
      msg << "extreme frequencies did not converge: best unconverged residual " << best_residual
          << " after " << max_restarts << " restarts (tolerance " << tol << ")";
      throw NumericError(msg.str());
    }
    if (!pending.empty()) {
      start = std::move(pending);
    } else {
      random_unit(rng, start);
    }
  }

  std::sort(locked_small.begin(), locked_small.end());
  std::sort(locked_large.begin(), locked_large.end());
  return ExtremeFrequencies{std::move(locked_small), std::move(locked_large)};
}

SpectrumReport spectrum(const ViewGraph& view, std::size_t L, std::size_t num_top,
                        const std::vector<double>* signal) {
  const std::size_t n = view.adjacency.n_rows;
  SpectrumReport report;
  if (n <= kDenseLimit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense_shifted_laplacian(view.norm()));
    if (solver.info() != Eigen::Success)
      throw NumericError("eigendecomposition failed to converge");
    const auto& ev = solver.eigenvalues();
    report.frequencies.assign(ev.data(), ev.data() + ev.size());
    report.full = true;
    if (signal) {
      if (signal->size() != n) {
        throw ValidationError("signal length " + std::to_string(signal->size()) +
                              " does not match node count " + std::to_string(n));
      }
      Eigen::Map<const Eigen::VectorXd> s(signal->data(), static_cast<Eigen::Index>(n));
      Eigen::VectorXd coef = solver.eigenvectors().transpose() * s;
      report.raw_energy.resize(n);
      report.filtered_energy.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double c = coef(static_cast<Eigen::Index>(i));
        double gain = std::pow(1.0 - report.frequencies[i], static_cast<double>(L));
        report.raw_energy[i] = c * c;
        report.filtered_energy[i] = (gain * c) * (gain * c);
      }
    }
  } else {
    if (signal) {
      throw ValidationError("signal spectrum needs the full decomposition (n <= " +
                            std::to_string(kDenseLimit) + ")");
    }
    ExtremeFrequencies ext = extreme_frequencies(view, num_top == 0 ? kDefaultNumTop : num_top);
    report.frequencies = ext.smallest;
    report.frequencies.insert(report.frequencies.end(), ext.largest.begin(), ext.largest.end());
    report.full = false;
  }
  report.response = filter_response(report.frequencies, L);
  report.max_frequency = report.frequencies.empty() ? 0.0 : report.frequencies.back();
  return report;
}

void save_spectrum_tsv(const std::string& path, const SpectrumReport& report) {
  const bool with_signal = !report.raw_energy.empty();
  std::string out;
  out += "# max_frequency " + format_double(report.max_frequency) + "\n";
  out += with_signal ? "frequency\tresponse\traw_energy\tfiltered_energy\n"
                     : "frequency\tresponse\n";
  for (std::size_t i = 0; i < report.frequencies.size(); ++i) {
    out += format_double(report.frequencies[i]);
    out += '\t';
    out += format_double(report.response[i]);
    if (with_signal) {
      out += '\t';
      out += format_double(report.raw_energy[i]);
      out += '\t';
      out += format_double(report.filtered_energy[i]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace mvad
