#include "cesynth/simd/cpu.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "cesynth/error.hpp"

namespace cesynth::simd {
namespace {

bool cpu_has_avx2() {
#if defined(CESYNTH_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("CESYNTH_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && cpu_has_avx2()) return Isa::kAvx2;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<int>& override_slot() {
  static std::atomic<int> slot{-1};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  return isa == Isa::kScalar || (isa == Isa::kAvx2 && cpu_has_avx2());
}

Isa active_isa() {
  const int forced = override_slot().load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Isa>(forced);
  static const Isa detected = detect();
  return detected;
}

void force_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw UsageError("SIMD kernel set '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
  }
  override_slot().store(static_cast<int>(isa), std::memory_order_relaxed);
}

}  // namespace cesynth::simd
