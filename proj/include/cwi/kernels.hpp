#ifndef CWI_KERNELS_HPP
#define CWI_KERNELS_HPP

// Similarity kernels behind CSLS and dictionary induction.
//
// Every kernel exists twice: `serial` is a plain loop reference kept for
// testing, `omp` is the blocked OpenMP version used in production. Both
// accumulate in double and break ties identically (higher score first, then
// lower row index), so they agree up to summation-order rounding.

#include <cstddef>
#include <span>
#include <vector>

namespace cwi {

enum class Execution { kSerial, kParallel };

namespace kernels {

// Row-major float matrix view.
struct MatrixView {
  const float* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const float> row(std::size_t r) const {
    return {data + r * cols, cols};
  }
};

struct Neighbor {
  std::size_t index;
  double score;
};

namespace serial {

// For each query row: mean of its k largest dot products with base rows.
std::vector<double> topk_mean_similarity(MatrixView queries, MatrixView base,
                                         std::size_t k);

// For each query q: the k base rows with the largest
// 2*dot(q, b) - query_penalty[q] - base_penalty[b], best first.
std::vector<std::vector<Neighbor>> csls_topk(MatrixView queries,
                                             MatrixView base,
                                             std::span<const double> query_penalty,
                                             std::span<const double> base_penalty,
                                             std::size_t k);

}  // namespace serial

namespace omp {

std::vector<double> topk_mean_similarity(MatrixView queries, MatrixView base,
                                         std::size_t k);

std::vector<std::vector<Neighbor>> csls_topk(MatrixView queries,
                                             MatrixView base,
                                             std::span<const double> query_penalty,
                                             std::span<const double> base_penalty,
                                             std::size_t k);

}  // namespace omp

// Dispatch helpers.
std::vector<double> topk_mean_similarity(MatrixView queries, MatrixView base,
                                         std::size_t k, Execution exec);
std::vector<std::vector<Neighbor>> csls_topk(MatrixView queries,
                                             MatrixView base,
                                             std::span<const double> query_penalty,
                                             std::span<const double> base_penalty,
                                             std::size_t k, Execution exec);

}  // namespace kernels
}  // namespace cwi

#endif  // CWI_KERNELS_HPP
