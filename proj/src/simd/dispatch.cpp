#include <atomic>
#include <cstdlib>
#include <string>

#include "shapemorph/error.hpp"
#include "shapemorph/simd/kernels.hpp"

namespace shapemorph::simd {
namespace {

Isa detect() {
#if defined(SHAPEMORPH_HAVE_AVX2)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
#if defined(SHAPEMORPH_HAVE_NEON)
  return Isa::neon;
#endif
  return Isa::scalar;
}

Isa initial_isa() {
  if (const char* env = std::getenv("SHAPEMORPH_SIMD"); env && *env) {
    const Isa wanted = parse_isa(env);
    if (isa_supported(wanted)) return wanted;
  }
  return detect();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

const char* to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  fail(ErrorCode::domain, "unknown SIMD variant '" + std::string(name) + "'");
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(SHAPEMORPH_HAVE_AVX2)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(SHAPEMORPH_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
  if (!isa_supported(isa))
    fail(ErrorCode::domain, std::string("SIMD variant not supported on this CPU: ") + to_string(isa));
  switch (isa) {
#if defined(SHAPEMORPH_HAVE_AVX2)
    case Isa::avx2: return avx2::table;
#endif
#if defined(SHAPEMORPH_HAVE_NEON)
    case Isa::neon: return neon::table;
#endif
    default: return scalar::table;
  }
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

const KernelTable& kernels() { return kernels_for(active_isa()); }

void force_isa(Isa isa) {
  kernels_for(isa);  // validates
  current().store(isa, std::memory_order_relaxed);
}

}  // namespace shapemorph::simd
