#include <cmath>

#include "cesynth/simd/kernels.hpp"

namespace cesynth::simd::scalar {

template <class T>
void gemm(const GemmArgs<T>& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    T* crow = g.c + i * g.ldc;
    if (g.beta == T{0}) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] = T{0};
    } else if (g.beta != T{1}) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] *= g.beta;
    }
    for (std::size_t p = 0; p < g.k; ++p) {
      const T a = g.alpha * (g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p]);
      if (a == T{0}) continue;
      if (g.trans_b) {
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += a * g.b[j * g.ldb + p];
      } else {
        const T* brow = g.b + p * g.ldb;
        for (std::size_t j = 0; j < g.n; ++j) crow[j] += a * brow[j];
      }
    }
  }
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void adam(const AdamArgs<T>& a) {
  const T one{1};
  for (std::size_t i = 0; i < a.n; ++i) {
    const T g = a.grad[i];
    const T m = a.beta1 * a.m[i] + (one - a.beta1) * g;
    const T v = a.beta2 * a.v[i] + (one - a.beta2) * (g * g);
    a.m[i] = m;
    a.v[i] = v;
    const T mhat = m / a.bias_correction1;
    const T vhat = v / a.bias_correction2;
    a.param[i] -= a.lr * mhat / (std::sqrt(vhat) + a.eps);
  }
}

template void gemm<float>(const GemmArgs<float>&);
template void gemm<double>(const GemmArgs<double>&);
template void axpy<float>(std::size_t, float, const float*, float*);
template void axpy<double>(std::size_t, double, const double*, double*);
template float dot<float>(std::size_t, const float*, const float*);
template double dot<double>(std::size_t, const double*, const double*);
template void adam<float>(const AdamArgs<float>&);
template void adam<double>(const AdamArgs<double>&);

}  // namespace cesynth::simd::scalar
