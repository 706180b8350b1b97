#include "shapemorph/simd/kernels.hpp"

#include <limits>

namespace shapemorph::simd::scalar {
namespace {

void sq_dist(const double* q, const double* const* cols, int dim,
             std::size_t n, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = q[d] - cols[d][j];
      acc = acc + diff * diff;
    }
    out[j] = acc;
  }
}

std::size_t nearest(const double* q, const double* const* cols, int dim,
                    std::size_t n, double* best_sq) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = n;
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = q[d] - cols[d][j];
      acc = acc + diff * diff;
    }
    if (acc < best) {
      best = acc;
      best_idx = j;
    }
  }
  if (best_sq) *best_sq = best;
  return best_idx;
}

void dot_rows(const double* const* a, const double* const* b, int dim,
              std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int d = 0; d < dim; ++d) acc = acc + a[d][i] * b[d][i];
    out[i] = acc;
  }
}

}  // namespace

const KernelTable table{&sq_dist, &nearest, &dot_rows};

}  // namespace shapemorph::simd::scalar
