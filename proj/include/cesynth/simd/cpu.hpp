#pragma once

#include <string_view>

namespace cesynth::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

/// True when the CPU and the build both support the given kernel set.
bool isa_supported(Isa isa);

/// Best supported kernel set, unless overridden by CESYNTH_SIMD=scalar|avx2
/// in the environment or by force_isa().
Isa active_isa();

/// Overrides runtime selection for the rest of the process. Throws UsageError
/// if the kernel set is not supported here.
void force_isa(Isa isa);

}  // namespace cesynth::simd
