// AArch64 variant; NEON is architecturally guaranteed there.

#include "shapemorph/simd/kernels.hpp"

#include <arm_neon.h>

#include <limits>

namespace shapemorph::simd::neon {
namespace {

inline float64x2_t sq_dist2(const float64x2_t* qv, const double* const* cols,
                            int dim, std::size_t j) {
  float64x2_t acc = vdupq_n_f64(0.0);
  for (int d = 0; d < dim; ++d) {
    const float64x2_t diff = vsubq_f64(qv[d], vld1q_f64(cols[d] + j));
    acc = vaddq_f64(acc, vmulq_f64(diff, diff));
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
  float64x2_t qv[kMaxDim];
  for (int d = 0; d < dim; ++d) qv[d] = vdupq_n_f64(q[d]);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) vst1q_f64(out + j, sq_dist2(qv, cols, dim, j));
  for (; j < n; ++j) out[j] = sq_dist1(q, cols, dim, j);
}

std::size_t nearest(const double* q, const double* const* cols, int dim,
                    std::size_t n, double* best_sq) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  float64x2_t qv[kMaxDim];
  for (int d = 0; d < dim; ++d) qv[d] = vdupq_n_f64(q[d]);

  float64x2_t best = vdupq_n_f64(inf);
  float64x2_t best_idx = vdupq_n_f64(static_cast<double>(n));
  const double start[2] = {0.0, 1.0};
  float64x2_t idx = vld1q_f64(start);
  const float64x2_t step = vdupq_n_f64(2.0);

  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const float64x2_t dist = sq_dist2(qv, cols, dim, j);
    const uint64x2_t lt = vcltq_f64(dist, best);
    best = vbslq_f64(lt, dist, best);
    best_idx = vbslq_f64(lt, idx, best_idx);
    idx = vaddq_f64(idx, step);
  }

  double lane_best[2];
  double lane_idx[2];
  vst1q_f64(lane_best, best);
  vst1q_f64(lane_idx, best_idx);

  double out_best = inf;
  std::size_t out_idx = n;
  for (int k = 0; k < 2; ++k) {
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
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (int d = 0; d < dim; ++d)
      acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a[d] + i), vld1q_f64(b[d] + i)));
    vst1q_f64(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) acc = acc + a[d][i] * b[d][i];
    out[i] = acc;
  }
}

}  // namespace

const KernelTable table{&sq_dist, &nearest, &dot_rows};

}  // namespace shapemorph::simd::neon
