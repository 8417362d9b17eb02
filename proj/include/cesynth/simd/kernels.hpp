#pragma once

#include <cstddef>

#include "cesynth/simd/cpu.hpp"

namespace cesynth::simd {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, with op(A) of size
// m x k and op(B) of size k x n. When trans_a is set, A is stored k x m.
template <class T>
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0, n = 0, k = 0;
  T alpha = T{1};
  const T* a = nullptr;
  std::size_t lda = 0;
  const T* b = nullptr;
  std::size_t ldb = 0;
  T beta = T{0};
  T* c = nullptr;
  std::size_t ldc = 0;
};

// Adam moment update for one parameter tensor. Bias corrections are passed
// in precomputed so the kernel is a pure elementwise loop.
template <class T>
struct AdamArgs {
  std::size_t n = 0;
  T* param = nullptr;
  const T* grad = nullptr;
  T* m = nullptr;
  T* v = nullptr;
  T lr = 0, beta1 = 0, beta2 = 0, eps = 0;
  T bias_correction1 = 1, bias_correction2 = 1;
};

template <class T>
struct KernelTable {
  void (*gemm)(const GemmArgs<T>&);
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);
  void (*adam)(const AdamArgs<T>&);
};

template <class T>
const KernelTable<T>& kernels_for(Isa isa);

template <class T>
const KernelTable<T>& kernels() {
  return kernels_for<T>(active_isa());
}

template <class T>
void gemm(const GemmArgs<T>& args) {
  kernels<T>().gemm(args);
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  kernels<T>().axpy(n, alpha, x, y);
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  return kernels<T>().dot(n, x, y);
}

template <class T>
void adam_update(const AdamArgs<T>& args) {
  kernels<T>().adam(args);
}

namespace scalar {
template <class T> void gemm(const GemmArgs<T>& args);
template <class T> void axpy(std::size_t n, T alpha, const T* x, T* y);
template <class T> T dot(std::size_t n, const T* x, const T* y);
template <class T> void adam(const AdamArgs<T>& args);
}  // namespace scalar

namespace avx2 {
template <class T> void gemm(const GemmArgs<T>& args);
template <class T> void axpy(std::size_t n, T alpha, const T* x, T* y);
template <class T> T dot(std::size_t n, const T* x, const T* y);
template <class T> void adam(const AdamArgs<T>& args);
}  // namespace avx2

}  // namespace cesynth::simd
