#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "mvad/dense.hpp"
#include "mvad/kernels.hpp"
#include "mvad/rng.hpp"
#include "mvad/sparse.hpp"

using namespace mvad;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

DenseMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

SparseMatrix random_graph(Rng& rng, std::size_t n, std::size_t avg_degree) {
  EdgeSetBuilder builder(n);
  const std::size_t target = n * avg_degree / 2;
  for (std::size_t e = 0; e < target; ++e) {
    std::size_t i = rng.uniform_below(n);
    std::size_t j = rng.uniform_below(n);
    if (i != j) builder.add_edge(i, j);
  }
  return builder.build();
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    double t0 = now_ms();
    f();
    double t1 = now_ms();
    if (t1 - t0 < best) best = t1 - t0;
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-24s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx\n", name, serial_ms,
              parallel_ms, parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1500;
  std::size_t dim = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 64;
  int reps = argc > 3 ? std::atoi(argv[3]) : 3;

  std::printf("n=%zu dim=%zu reps=%d threads=%d\n", n, dim, reps, kernels::max_threads());

  Rng rng(42);
  DenseMatrix a = random_matrix(rng, n, dim);
  DenseMatrix b = random_matrix(rng, dim, dim);
  SparseMatrix graph = random_graph(rng, n, 16);
  DenseMatrix z = random_matrix(rng, n, dim);
  DenseMatrix out(n, dim);
  std::vector<double> errs(n);

  report("matmul",
         time_best_of(reps, [&] { kernels::serial::matmul(a, b, out); }),
         time_best_of(reps, [&] { kernels::matmul(a, b, out); }));

  report("spmm",
         time_best_of(reps, [&] { kernels::serial::spmm(graph, a, out); }),
         time_best_of(reps, [&] { kernels::spmm(graph, a, out); }));

  report("structure row errors",
         time_best_of(reps,
                      [&] { kernels::serial::sigmoid_gram_row_errors(z, graph, 256, errs); }),
         time_best_of(reps, [&] { kernels::sigmoid_gram_row_errors(z, graph, 256, errs); }));

  DenseMatrix dz(n, dim);
  report("structure loss grad",
         time_best_of(reps,
                      [&] {
                        dz.fill(0.0);
                        kernels::serial::sigmoid_gram_l1_grad(z, graph, 1.0, 256, dz);
                      }),
         time_best_of(reps, [&] {
           dz.fill(0.0);
           kernels::sigmoid_gram_l1_grad(z, graph, 1.0, 256, dz);
         }));

  return 0;
}
