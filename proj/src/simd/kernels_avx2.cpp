// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "shapemorph/simd/kernels.hpp"

#include <immintrin.h>

#include <limits>

namespace shapemorph::simd::avx2 {
namespace {

inline __m256d sq_dist4(const __m256d* qv, const double* const* cols, int dim,
                        std::size_t j) {
  __m256d acc = _mm256_setzero_pd();
  for (int d = 0; d < dim; ++d) {
    const __m256d diff = _mm256_sub_pd(qv[d], _mm256_loadu_pd(cols[d] + j));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
  }
  return acc;
}

inline double sq_dist1(const double* q, const double* const* cols, int dim,
                       std::size_t j) {
  double acc = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = q[d] - cols[d][j];
    acc = acc + diff * diff;
  }
  return acc;
}

void sq_dist(const double* q, const double* const* cols, int dim,
             std::size_t n, double* out) {
  __m256d qv[kMaxDim];
  for (int d = 0; d < dim; ++d) qv[d] = _mm256_set1_pd(q[d]);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) _mm256_storeu_pd(out + j, sq_dist4(qv, cols, dim, j));
  for (; j < n; ++j) out[j] = sq_dist1(q, cols, dim, j);
}

std::size_t nearest(const double* q, const double* const* cols, int dim,
                    std::size_t n, double* best_sq) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  __m256d qv[kMaxDim];
  for (int d = 0; d < dim; ++d) qv[d] = _mm256_set1_pd(q[d]);

  __m256d best = _mm256_set1_pd(inf);
  __m256d best_idx = _mm256_set1_pd(static_cast<double>(n));
  __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
  const __m256d step = _mm256_set1_pd(4.0);

  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dist = sq_dist4(qv, cols, dim, j);
    const __m256d lt = _mm256_cmp_pd(dist, best, _CMP_LT_OQ);
    best = _mm256_blendv_pd(best, dist, lt);
    best_idx = _mm256_blendv_pd(best_idx, idx, lt);
    idx = _mm256_add_pd(idx, step);
  }

  alignas(32) double lane_best[4];
  alignas(32) double lane_idx[4];
  _mm256_store_pd(lane_best, best);
  _mm256_store_pd(lane_idx, best_idx);

  double out_best = inf;
  std::size_t out_idx = n;
  for (int k = 0; k < 4; ++k) {
    const auto li = static_cast<std::size_t>(lane_idx[k]);
    if (lane_best[k] < out_best || (lane_best[k] == out_best && li < out_idx)) {
      out_best = lane_best[k];
      out_idx = li;
    }
  }
  for (; j < n; ++j) {
    const double dist = sq_dist1(q, cols, dim, j);
    if (dist < out_best) {
      out_best = dist;
      out_idx = j;
    }
  }
  if (best_sq) *best_sq = out_best;
  return out_idx;
}

void dot_rows(const double* const* a, const double* const* b, int dim,
              std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (int d = 0; d < dim; ++d)
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a[d] + i),
                                             _mm256_loadu_pd(b[d] + i)));
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) acc = acc + a[d][i] * b[d][i];
    out[i] = acc;
  }
}

}  // namespace

const KernelTable table{&sq_dist, &nearest, &dot_rows};

}  // namespace shapemorph::simd::avx2
