#include "cesynth/simd/kernels.hpp"

namespace cesynth::simd {

template <class T>
const KernelTable<T>& kernels_for(Isa isa) {
  static const KernelTable<T> scalar_table{&scalar::gemm<T>, &scalar::axpy<T>, &scalar::dot<T>, &scalar::adam<T>};
#if defined(CESYNTH_HAVE_AVX2_TU)
  static const KernelTable<T> avx2_table{&avx2::gemm<T>, &avx2::axpy<T>, &avx2::dot<T>, &avx2::adam<T>};
  if (isa == Isa::kAvx2) return avx2_table;
#else
  (void)isa;
#endif
  return scalar_table;
}

template const KernelTable<float>& kernels_for<float>(Isa);
template const KernelTable<double>& kernels_for<double>(Isa);

}  // namespace cesynth::simd
