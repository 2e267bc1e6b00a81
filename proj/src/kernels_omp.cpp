#include <algorithm>

#include <Eigen/Dense>

#include "cwi/error.hpp"
#include "cwi/kernels.hpp"

namespace cwi::kernels::omp {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kQueryBlock = 128;
constexpr std::size_t kBaseBlock = 2048;

bool better(const Neighbor& a, const Neighbor& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

RowMatrix widen(MatrixView m, std::size_t first, std::size_t count) {
  RowMatrix out(static_cast<Eigen::Index>(count),
                static_cast<Eigen::Index>(m.cols));
  const float* src = m.data + first * m.cols;
  double* dst = out.data();
  for (std::size_t i = 0; i < count * m.cols; ++i) dst[i] = src[i];
  return out;
}

void keep_best(std::vector<Neighbor>& best, std::size_t k) {
  if (best.size() > k) {
    std::nth_element(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(k),
                     best.end(), better);
    best.resize(k);
  }
}

// Shared driver: score(q, b) = scale * dot(q, b) - qp[q] - bp[b], keeping
// the k best per query. Penalty spans may be empty (treated as zero).
std::vector<std::vector<Neighbor>> blocked_topk(
    MatrixView queries, MatrixView base, std::span<const double> qp,
    std::span<const double> bp, double scale, std::size_t k) {
  if (queries.cols != base.cols) {
    throw ValidationError("kernel dimension mismatch");
  }
  if (k == 0 || k > base.rows) {
    throw ValidationError("k=" + std::to_string(k) + " must be in [1, " +
                          std::to_string(base.rows) + "]");
  }
  std::vector<std::vector<Neighbor>> out(queries.rows);
  const auto n_blocks =
      static_cast<long>((queries.rows + kQueryBlock - 1) / kQueryBlock);

#pragma omp parallel for schedule(dynamic)
  for (long blk = 0; blk < n_blocks; ++blk) {
    const std::size_t q0 = static_cast<std::size_t>(blk) * kQueryBlock;
    const std::size_t nq = std::min(kQueryBlock, queries.rows - q0);
    const RowMatrix q = widen(queries, q0, nq);
    std::vector<std::vector<Neighbor>> best(nq);
    for (auto& b : best) b.reserve(k + kBaseBlock);

    for (std::size_t b0 = 0; b0 < base.rows; b0 += kBaseBlock) {
      const std::size_t nb = std::min(kBaseBlock, base.rows - b0);
      const RowMatrix b = widen(base, b0, nb);
      const RowMatrix sims = q * b.transpose();
      for (std::size_t i = 0; i < nq; ++i) {
        const double qpen = qp.empty() ? 0.0 : qp[q0 + i];
        for (std::size_t j = 0; j < nb; ++j) {
          const double bpen = bp.empty() ? 0.0 : bp[b0 + j];
          best[i].push_back({b0 + j, scale * sims(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)) -
                                         qpen - bpen});
        }
        keep_best(best[i], k);
      }
    }
    for (std::size_t i = 0; i < nq; ++i) {
      std::sort(best[i].begin(), best[i].end(), better);
      out[q0 + i] = std::move(best[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<double> topk_mean_similarity(MatrixView queries, MatrixView base,
                                         std::size_t k) {
  const auto best = blocked_topk(queries, base, {}, {}, 1.0, k);
  std::vector<double> out(queries.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    double sum = 0.0;
    for (const Neighbor& n : best[q]) sum += n.score;
    out[q] = sum / static_cast<double>(k);
  }
  return out;
}

std::vector<std::vector<Neighbor>> csls_topk(MatrixView queries,
                                             MatrixView base,
                                             std::span<const double> query_penalty,
                                             std::span<const double> base_penalty,
                                             std::size_t k) {
  return blocked_topk(queries, base, query_penalty, base_penalty, 2.0, k);
}

}  // namespace cwi::kernels::omp
