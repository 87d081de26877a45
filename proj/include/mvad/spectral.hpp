#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvad/graph.hpp"

namespace mvad {

// Frequencies are eigenvalues of I - A~ (normalized Laplacian with self
// loops), which lie in [0, 2); the L-hop encoder's gain at frequency f is
// (1 - f)^L.
struct SpectrumReport {
  std::vector<double> frequencies;  // ascending
  double max_frequency = 0.0;
  std::vector<double> response;         // (1 - f)^L per listed frequency
  std::vector<double> raw_energy;       // squared Fourier coefficient, empty without a signal
  std::vector<double> filtered_energy;  // after multiplying by the response
  bool full = true;  // false when only the extreme frequencies were computed
};

// Full symmetric eigendecomposition for n <= 2000. Larger graphs fall back to
// the iterative solver and report only the num_top smallest plus num_top
// largest frequencies (num_top 0 picks a default). An optional signal of
// length n adds its per-frequency energies (full decomposition only).
SpectrumReport spectrum(const ViewGraph& view, std::size_t L, std::size_t num_top = 0,
                        const std::vector<double>* signal = nullptr);

// All frequencies, ascending; requires n <= 2000.
std::vector<double> laplacian_frequencies(const ViewGraph& view);

std::vector<double> filter_response(const std::vector<double>& frequencies, std::size_t L);

struct ExtremeFrequencies {
  std::vector<double> smallest;  // ascending
  std::vector<double> largest;   // ascending
};

// Restarted Lanczos with full reorthogonalization and locking of converged
// Ritz pairs; residual tolerance on explicit ||(I - A~)x - fx||. Throws
// NumericError with the achieved residual when the restart cap is hit.
ExtremeFrequencies extreme_frequencies(const ViewGraph& view, std::size_t num_top,
                                       double tol = 1e-8, std::size_t max_restarts = 200);

// Columns: frequency, response, then raw_energy and filtered_energy when a
// signal was analyzed. A "# max_frequency <value>" comment line leads.
void save_spectrum_tsv(const std::string& path, const SpectrumReport& report);

}  // namespace mvad
