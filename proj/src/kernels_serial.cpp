#include <algorithm>

#include "cwi/error.hpp"
#include "cwi/kernels.hpp"

namespace cwi::kernels {

namespace {

bool better(const Neighbor& a, const Neighbor& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += double(a[i]) * double(b[i]);
  return sum;
}

void check(MatrixView queries, MatrixView base, std::size_t k) {
  if (queries.cols != base.cols) {
    throw ValidationError("kernel dimension mismatch");
  }
  if (k == 0 || k > base.rows) {
    throw ValidationError("k=" + std::to_string(k) +
                          " must be in [1, " + std::to_string(base.rows) + "]");
  }
}

}  // namespace

namespace serial {

std::vector<double> topk_mean_similarity(MatrixView queries, MatrixView base,
                                         std::size_t k) {
  check(queries, base, k);
  std::vector<double> out(queries.rows);
  std::vector<Neighbor> all(base.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    for (std::size_t b = 0; b < base.rows; ++b) {
      all[b] = {b, dot(queries.row(q), base.row(b))};
    }
    std::sort(all.begin(), all.end(), better);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += all[i].score;
    out[q] = sum / static_cast<double>(k);
  }
  return out;
}

std::vector<std::vector<Neighbor>> csls_topk(MatrixView queries,
                                             MatrixView base,
                                             std::span<const double> query_penalty,
                                             std::span<const double> base_penalty,
                                             std::size_t k) {
  check(queries, base, k);
  std::vector<std::vector<Neighbor>> out(queries.rows);
  std::vector<Neighbor> all(base.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    for (std::size_t b = 0; b < base.rows; ++b) {
      all[b] = {b, 2.0 * dot(queries.row(q), base.row(b)) - query_penalty[q] -
                       base_penalty[b]};
    }
    std::sort(all.begin(), all.end(), better);
    out[q].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

}  // namespace serial

std::vector<double> topk_mean_similarity(MatrixView queries, MatrixView base,
                                         std::size_t k, Execution exec) {
  return exec == Execution::kSerial
             ? serial::topk_mean_similarity(queries, base, k)
             : omp::topk_mean_similarity(queries, base, k);
}

std::vector<std::vector<Neighbor>> csls_topk(MatrixView queries,
                                             MatrixView base,
                                             std::span<const double> query_penalty,
                                             std::span<const double> base_penalty,
                                             std::size_t k, Execution exec) {
  return exec == Execution::kSerial
             ? serial::csls_topk(queries, base, query_penalty, base_penalty, k)
             : omp::csls_topk(queries, base, query_penalty, base_penalty, k);
}

}  // namespace cwi::kernels
