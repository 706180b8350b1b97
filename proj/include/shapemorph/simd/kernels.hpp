#pragma once

// Data-parallel inner loops shared by the kernel assembly, nearest-neighbour
// search and normal projection. Every ISA variant performs the same
// floating-point operations in the same order as the scalar reference, so
// results are bit-identical regardless of which variant is dispatched.
//
// Point sets are passed structure-of-arrays: cols[d] points at n contiguous
// coordinates of axis d (an Eigen column-major N x D matrix gives this
// layout for free). dim is at most kMaxDim.

#include <cstddef>
#include <string_view>

namespace shapemorph::simd {

inline constexpr int kMaxDim = 3;

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  // out[j] = sum_d (q[d] - cols[d][j])^2
  void (*sq_dist)(const double* q, const double* const* cols, int dim,
                  std::size_t n, double* out);
  // Index of the point nearest to q (lowest index on ties); n when n == 0.
  std::size_t (*nearest)(const double* q, const double* const* cols, int dim,
                         std::size_t n, double* best_sq);
  // out[i] = sum_d a[d][i] * b[d][i]
  void (*dot_rows)(const double* const* a, const double* const* b, int dim,
                   std::size_t n, double* out);
};

const char* to_string(Isa isa);
bool isa_supported(Isa isa);

// The variant chosen at startup: the widest supported ISA, unless the
// SHAPEMORPH_SIMD environment variable (scalar|avx2|neon) asks otherwise.
Isa active_isa();
const KernelTable& kernels();
const KernelTable& kernels_for(Isa isa);

// Overrides the dispatched variant; throws if the ISA is unsupported here.
void force_isa(Isa isa);
Isa parse_isa(std::string_view name);

namespace scalar {
extern const KernelTable table;
}
#if defined(SHAPEMORPH_HAVE_AVX2)
namespace avx2 {
extern const KernelTable table;
}
#endif
#if defined(SHAPEMORPH_HAVE_NEON)
namespace neon {
extern const KernelTable table;
}
#endif

}  // namespace shapemorph::simd
